//! Writes the bundled synthetic banks under `data/`.

use std::path::Path;

use gnn_designer::synthetic::{confidence_bank, planted_bank};

fn main() -> gnn_designer::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let c = root.join("confidence5");
    std::fs::create_dir_all(&c).unwrap();
    let t = confidence_bank(0);
    t.write_bench_csv(c.join("bench.csv"))?;
    t.write_property_dir(&c.join("properties"))?;

    let p = root.join("planted");
    std::fs::create_dir_all(&p).unwrap();
    let planted = planted_bank(0, false);
    planted.table.write_bench_csv(p.join("bench.csv"))?;
    planted.table.write_property_dir(&p.join("properties"))?;
    println!("optimum {}", planted.optimum);
    Ok(())
}
