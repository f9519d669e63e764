use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dpaudit::corpus::{all_cases, run_matrix, MatrixConfig};
use dpaudit::distaudit::{empirical_pld, sample_outputs, DistAuditConfig};
use dpaudit::exec::Execution;
use dpaudit::mechanisms::{GaussianMechanism, LaplaceMechanism, MechanismParams};
use dpaudit::Value;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sampling(c: &mut Criterion) {
    let lm = LaplaceMechanism::new();
    let gm = GaussianMechanism::new();
    let lp = MechanismParams::pure(1.0, 1.0).unwrap();
    let gp = MechanismParams::new(1.0, 1e-6, 1.0).unwrap();
    let mut g = c.benchmark_group("sample_outputs");
    for n in [10_000usize, 100_000] {
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(format!("laplace/{name}"), n), &n, |b, &n| {
                b.iter(|| sample_outputs(&lm, &Value::Real(0.0), &lp, black_box(n), 1, 0, exec).unwrap())
            });
            g.bench_with_input(BenchmarkId::new(format!("gaussian/{name}"), n), &n, |b, &n| {
                b.iter(|| sample_outputs(&gm, &Value::Vector(vec![0.0; 4]), &gp, black_box(n), 1, 0, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn estimation(c: &mut Criterion) {
    let lm = LaplaceMechanism::new().untrusted();
    let p = MechanismParams::pure(1.0, 1.0).unwrap();
    let mut g = c.benchmark_group("empirical_pld");
    g.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = DistAuditConfig::new(100_000, 1e-6, 1.0, 3);
        cfg.exec = exec;
        g.bench_function(name, |b| b.iter(|| empirical_pld(&lm, &Value::Real(0.0), &Value::Real(1.0), &p, &cfg, 1).unwrap()));
    }
    g.finish();
}

fn matrix(c: &mut Criterion) {
    let cases = all_cases();
    let mut g = c.benchmark_group("corpus_matrix");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = MatrixConfig { exec, ..Default::default() };
        g.bench_function(name, |b| b.iter(|| assert!(run_matrix(&cases, &cfg).passed)));
    }
    g.finish();
}

criterion_group!(benches, sampling, estimation, matrix);
criterion_main!(benches);
