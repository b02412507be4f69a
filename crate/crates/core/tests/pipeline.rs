use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tempfile::NamedTempFile;

use boss_core::batch::{run_batch, BatchConfig};
use boss_core::data::build_grid;
use boss_core::engine::{boss_test, TestOptions};
use boss_core::io::{read_dataset, read_table, Clinical, ExpressionFile, Layout, OutcomeColumns};
use boss_core::regress::FitConfig;

struct Cohort {
    ids: Vec<String>,
    time: Vec<f64>,
    event: Vec<bool>,
    age: Vec<f64>,
    genes: Vec<Vec<f64>>,
}

fn cohort(n: usize, genes: usize, seed: u64) -> Cohort {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let genes: Vec<Vec<f64>> = (0..genes).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let age: Vec<f64> = (0..n).map(|_| 60.0 + 8.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut time = Vec::new();
    let mut event = Vec::new();
    for i in 0..n {
        let rate = (0.9 * f64::from(u8::from(genes[0][i] > 0.3)) + 0.02 * (age[i] - 60.0)).exp();
        let t = -rng.random::<f64>().ln() / rate;
        let c = 3.0 * rng.random::<f64>();
        time.push(t.min(c));
        event.push(t <= c);
    }
    Cohort {
        ids: (0..n).map(|i| format!("p{i:03}")).collect(),
        time,
        event,
        age,
        genes,
    }
}

fn write(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn clinical_csv(c: &Cohort, order: &[usize]) -> NamedTempFile {
    let mut s = String::from("sample,os_time,os_event,age\n");
    for &i in order {
        s.push_str(&format!("{},{},{},{}\n", c.ids[i], c.time[i], u8::from(c.event[i]), c.age[i]));
    }
    write(&s)
}

fn samples_as_rows(c: &Cohort) -> NamedTempFile {
    let mut s = String::from("sample");
    for g in 0..c.genes.len() {
        s.push_str(&format!(",G{g}"));
    }
    s.push('\n');
    for i in 0..c.ids.len() {
        s.push_str(&c.ids[i]);
        for g in &c.genes {
            s.push_str(&format!(",{}", g[i]));
        }
        s.push('\n');
    }
    write(&s)
}

fn genes_as_rows(c: &Cohort) -> NamedTempFile {
    let mut s = format!("gene,{}\n", c.ids.join(","));
    for (g, values) in c.genes.iter().enumerate() {
        let row: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("G{g},{}\n", row.join(",")));
    }
    write(&s)
}

fn config() -> BatchConfig {
    BatchConfig {
        fit: FitConfig::cox(),
        k: 6,
        block: 3,
        ..BatchConfig::default()
    }
}

#[test]
fn both_expression_layouts_give_identical_reports() {
    let c = cohort(120, 7, 1);
    let order: Vec<usize> = (0..120).rev().collect();
    let cols = OutcomeColumns::parse("os_time,os_event").unwrap();
    let clinical = Clinical::from_table(&read_table(clinical_csv(&c, &order).path()).unwrap(), &cols, &["age".into()]).unwrap();
    let wide_file = samples_as_rows(&c);
    let long_file = genes_as_rows(&c);
    let wide = ExpressionFile::open(wide_file.path(), Layout::SamplesAsRows).unwrap();
    let long = ExpressionFile::open(long_file.path(), Layout::GenesAsRows).unwrap();
    let a = run_batch(&wide, &clinical, &config(), 5).unwrap();
    let b = run_batch(&long, &clinical, &config(), 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.metadata.samples_joined, 120);
    assert_eq!(a.genes.len(), 7);
    assert!(a.genes[0].significant, "{:?}", a.genes[0]);
}

#[test]
fn batch_gene_equals_single_test() {
    let c = cohort(100, 3, 2);
    let order: Vec<usize> = (0..100).collect();
    let clin_file = clinical_csv(&c, &order);
    let expr_file = samples_as_rows(&c);
    let cols = OutcomeColumns::parse("os_time,os_event").unwrap();
    let clinical = Clinical::from_table(&read_table(clin_file.path()).unwrap(), &cols, &["age".into()]).unwrap();
    let expression = ExpressionFile::open(expr_file.path(), Layout::SamplesAsRows).unwrap();
    let cfg = config();
    let report = run_batch(&expression, &clinical, &cfg, 9).unwrap();

    // the same gene as a column of a single table
    let mut s = String::from("sample,os_time,os_event,age,G1\n");
    for i in 0..100 {
        s.push_str(&format!("{},{},{},{},{}\n", c.ids[i], c.time[i], u8::from(c.event[i]), c.age[i], c.genes[1][i]));
    }
    let single = write(&s);
    let data = read_dataset(single.path(), &cols, "G1", None, &["age".into()]).unwrap();
    let grid = build_grid(&data.biomarker, cfg.k, data.default_min_group()).unwrap();
    let r = boss_test(&data, &grid, &cfg.fit, &TestOptions { seed: 10, ..cfg.test }).unwrap();
    let g = &report.genes[1];
    assert_eq!(g.optimal_cutoff, Some(r.optimal_cutoff));
    assert_eq!(g.z, Some(r.z_star));
    assert!((g.fwer.unwrap() - r.fwer).abs() < 1e-12);
}

#[test]
fn unmatched_samples_are_counted() {
    let c = cohort(60, 2, 3);
    let order: Vec<usize> = (0..50).collect();
    let clin_file = clinical_csv(&c, &order);
    let expr_file = samples_as_rows(&c);
    let cols = OutcomeColumns::parse("os_time,os_event").unwrap();
    let clinical = Clinical::from_table(&read_table(clin_file.path()).unwrap(), &cols, &[]).unwrap();
    let expression = ExpressionFile::open(expr_file.path(), Layout::SamplesAsRows).unwrap();
    let report = run_batch(&expression, &clinical, &config(), 0).unwrap();
    assert_eq!(report.metadata.samples_joined, 50);
    assert_eq!(report.metadata.unmatched_expression, 10);
    assert_eq!(report.metadata.unmatched_clinical, 0);
}
