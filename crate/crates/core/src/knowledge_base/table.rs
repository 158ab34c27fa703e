use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_data::DatasetMeta;
use crate::properties::PropertyVector;
use crate::search_space::Architecture;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfRecord {
    pub valid_perf: f64,
    pub test_perf: f64,
}

impl PerfRecord {
    pub fn new(valid_perf: f64, test_perf: f64) -> Result<Self> {
        for v in [valid_perf, test_perf] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("performance {v} outside [0, 1]")));
            }
        }
        Ok(Self { valid_perf, test_perf })
    }
}

/// Recorded (dataset, architecture) -> performance lookups plus per-dataset property
/// vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchmarkTable {
    records: BTreeMap<String, BTreeMap<Architecture, PerfRecord>>,
    metas: BTreeMap<String, DatasetMeta>,
    properties: BTreeMap<String, PropertyVector>,
    datasets: BTreeSet<String>,
    excluded: BTreeSet<String>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    dataset: String,
    #[serde(rename = "macro")]
    macro_pattern: String,
    ops: String,
    valid_perf: f64,
    test_perf: f64,
}

impl BenchmarkTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads `bench.csv` and, when given, every `*.json` property file in `props_dir`.
    pub fn load(bench_csv: impl AsRef<Path>, props_dir: Option<&Path>) -> Result<Self> {
        let mut t = Self::read_bench_csv(bench_csv, 1.0)?;
        if let Some(dir) = props_dir {
            t.load_property_dir(dir)?;
        }
        Ok(t)
    }

    /// Parses a bench CSV. Each perf is multiplied by `scale` (use 0.01 for percentages).
    pub fn read_bench_csv(path: impl AsRef<Path>, scale: f64) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let mut t = Self::new();
        for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
            let arch = Architecture::from_columns(&row.macro_pattern, &row.ops).map_err(|v| {
                let msg: Vec<String> = v.iter().map(|v| v.to_string()).collect();
                Error::parse(path, line, msg.join("; "))
            })?;
            let rec = PerfRecord::new(row.valid_perf * scale, row.test_perf * scale)
                .map_err(|e| Error::parse(path, line, e.to_string()))?;
            if t.insert(&row.dataset, arch, rec).is_some() {
                return Err(Error::parse(path, line, format!("duplicate record for {} {arch}", row.dataset)));
            }
        }
        Ok(t)
    }

    pub fn write_bench_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        let io = |e: csv::Error| Error::Io { path: path.to_path_buf(), source: e.into() };
        w.write_record(["dataset", "macro", "ops", "valid_perf", "test_perf"]).map_err(io)?;
        for (ds, recs) in &self.records {
            for (arch, r) in recs {
                let (m, o) = arch.dashed();
                w.write_record([ds.as_str(), &m, &o, &format!("{:?}", r.valid_perf), &format!("{:?}", r.test_perf)])
                    .map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_property_dir(&mut self, dir: &Path) -> Result<()> {
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for p in paths {
            self.set_properties(PropertyVector::load(&p)?);
        }
        Ok(())
    }

    pub fn write_property_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, pv) in &self.properties {
            let p = dir.join(format!("{name}.json"));
            fs::write(&p, pv.to_json() + "\n").map_err(|e| Error::io(p, e))?;
        }
        Ok(())
    }

    /// Inserts or replaces a record, returning the previous one.
    pub fn insert(&mut self, dataset: &str, arch: Architecture, rec: PerfRecord) -> Option<PerfRecord> {
        self.datasets.insert(dataset.to_string());
        self.records.entry(dataset.to_string()).or_default().insert(arch, rec)
    }

    pub fn set_properties(&mut self, pv: PropertyVector) {
        self.datasets.insert(pv.dataset.clone());
        self.properties.insert(pv.dataset.clone(), pv);
    }

    pub fn set_meta(&mut self, meta: DatasetMeta) {
        self.datasets.insert(meta.name.clone());
        self.metas.insert(meta.name.clone(), meta);
    }

    /// All dataset names, sorted.
    pub fn datasets(&self) -> Vec<&str> {
        self.datasets.iter().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.datasets.contains(name)
    }

    /// Datasets with both a property vector and at least one record, sorted.
    pub fn bank(&self) -> Vec<&str> {
        self.datasets
            .iter()
            .filter(|d| self.properties.contains_key(*d) && self.records.get(*d).is_some_and(|r| !r.is_empty()))
            .map(String::as_str)
            .collect()
    }

    pub fn excluded(&self) -> &BTreeSet<String> {
        &self.excluded
    }

    pub fn meta(&self, dataset: &str) -> Option<&DatasetMeta> {
        self.metas.get(dataset)
    }

    pub fn properties(&self, dataset: &str) -> Option<&PropertyVector> {
        self.properties.get(dataset)
    }

    pub fn records(&self, dataset: &str) -> Option<&BTreeMap<Architecture, PerfRecord>> {
        self.records.get(dataset)
    }

    pub fn num_records(&self) -> usize {
        self.records.values().map(BTreeMap::len).sum()
    }

    pub fn record(&self, dataset: &str, arch: &Architecture) -> Result<PerfRecord> {
        if !self.contains(dataset) {
            return Err(Error::NotFound { dataset: dataset.into(), arch: None });
        }
        self.records
            .get(dataset)
            .and_then(|r| r.get(arch))
            .copied()
            .ok_or_else(|| Error::NotFound { dataset: dataset.into(), arch: Some(arch.to_string()) })
    }

    pub fn get(&self, dataset: &str, arch: &Architecture) -> Option<PerfRecord> {
        self.records.get(dataset).and_then(|r| r.get(arch)).copied()
    }

    /// The `n` best architectures on `dataset` by validation performance; ties by key.
    pub fn top_models(&self, dataset: &str, n: usize) -> Vec<(Architecture, PerfRecord)> {
        let Some(recs) = self.records.get(dataset) else {
            return Vec::new();
        };
        let mut all: Vec<_> = recs.iter().map(|(a, r)| (*a, *r)).collect();
        all.sort_by(|x, y| y.1.valid_perf.total_cmp(&x.1.valid_perf).then(x.0.cmp(&y.0)));
        all.truncate(n);
        all
    }

    /// Every architecture recorded on any dataset.
    pub fn architectures(&self) -> BTreeSet<Architecture> {
        self.records.values().flat_map(|r| r.keys().copied()).collect()
    }
}

/// A copy of `table` with every trace of `name` removed. The original is untouched.
pub fn exclude_dataset(table: &BenchmarkTable, name: &str) -> Result<BenchmarkTable> {
    if !table.contains(name) {
        return Err(Error::UnknownDataset(name.to_string()));
    }
    let mut t = table.clone();
    t.records.remove(name);
    t.metas.remove(name);
    t.properties.remove(name);
    t.datasets.remove(name);
    t.excluded.insert(name.to_string());
    Ok(t)
}
