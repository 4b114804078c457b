use evar_portfolio::model::ScenarioSet;
use evar_portfolio::scenario::{gen_cov1, gen_cov2, sample_mvn, sample_mvt, CovKind, Family, InstanceSpec};
use nalgebra::DMatrix;

fn sample_moments(s: &ScenarioSet) -> (Vec<f64>, DMatrix<f64>) {
    let n = s.n();
    let big_n = s.len() as f64;
    let mean: Vec<f64> = (0..n).map(|i| s.column(i).iter().sum::<f64>() / big_n).collect();
    let mut cov = DMatrix::zeros(n, n);
    for row in s.rows() {
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    (mean, cov / (big_n - 1.0))
}

#[test]
fn normal_sample_moments_concentrate() {
    let n = 5;
    let big_n = 100_000;
    let mean = vec![0.5, -1.0, 0.0, 2.0, 0.1];
    for cov in [gen_cov1(n, 1), gen_cov2(n, 1)] {
        let s = sample_mvn(&mean, &cov, big_n, 42).unwrap();
        let (m, c) = sample_moments(&s);
        let max_diag = cov.diagonal().max();
        for i in 0..n {
            assert!((m[i] - mean[i]).abs() < 4.0 / (big_n as f64).sqrt() * max_diag.sqrt());
        }
        assert!((c - &cov).norm() / cov.norm() < 0.1);
        assert!(s.probs().iter().all(|p| *p == 1.0 / big_n as f64));
    }
}

#[test]
fn standard_normal_tail_frequency() {
    let s = sample_mvn(&[0.0], &DMatrix::identity(1, 1), 100_000, 7).unwrap();
    let frac = s.column(0).iter().filter(|x| **x > 1.6449).count() as f64 / 1e5;
    assert!((frac - 0.05).abs() < 0.01, "{frac}");
}

#[test]
fn student_t_has_heavy_tails() {
    let s = sample_mvt(&[0.0], &DMatrix::identity(1, 1), 5.0, 100_000, 3).unwrap();
    let x = s.column(0);
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let excess = m4 / (m2 * m2) - 3.0;
    assert!((excess - 6.0).abs() < 2.0, "excess kurtosis {excess}");
}

#[test]
fn t_instance_pairs_with_normal_instance() {
    let cov = gen_cov1(3, 5);
    let mean = [0.0; 3];
    let normal = sample_mvn(&mean, &cov, 20_000, 11).unwrap();
    let t = sample_mvt(&mean, &cov, 1e6, 20_000, 11).unwrap();
    let rms = (normal
        .returns()
        .iter()
        .zip(t.returns())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / normal.returns().len() as f64)
        .sqrt();
    assert!(rms < 1e-2, "{rms}");

    // At nu = 5 every row is a positive multiple of its normal sibling.
    let t5 = sample_mvt(&mean, &cov, 5.0, 1000, 11).unwrap();
    let normal_small = sample_mvn(&mean, &cov, 1000, 11).unwrap();
    for (a, b) in normal_small.rows().zip(t5.rows()) {
        let r = b[0] / a[0];
        assert!(r > 0.0);
        for i in 1..3 {
            assert!((b[i] - r * a[i]).abs() < 1e-12 * (1.0 + b[i].abs()));
        }
    }
}

#[test]
fn instances_are_reproducible_to_the_bit() {
    for kind in [CovKind::Cov1, CovKind::Cov2] {
        for family in [Family::Normal, Family::StudentT] {
            let spec = InstanceSpec::new(kind, family, 6, 500, 123);
            let a = spec.generate().unwrap();
            let b = spec.generate().unwrap();
            let bits = |s: &ScenarioSet| s.returns().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
        }
    }
}

#[test]
fn sidecar_is_written_next_to_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.csv");
    let spec = InstanceSpec::new(CovKind::Cov2, Family::StudentT, 3, 25, 9);
    let set = spec.generate().unwrap();
    spec.write_with_sidecar(&set, &path).unwrap();
    let back = ScenarioSet::load_csv(&path).unwrap();
    assert_eq!(back.len(), 25);
    let json = std::fs::read_to_string(dir.path().join("inst.csv.json")).unwrap();
    let spec_back: InstanceSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(spec_back, spec);
}
