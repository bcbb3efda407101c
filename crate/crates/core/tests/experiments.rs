use partexp::experiments::{
    append_csv, convergence_study, fit_slope, parse_geometric, read_csv, reference_solution, relative_error, work_precision_study,
    write_csv, Mode, Status, StudyOptions, StudyRow, CSV_HEADER,
};
use partexp::integrators::Method;
use partexp::problems::{build, semilinear_exact, ProblemParams};
use proptest::prelude::*;

fn row_strategy() -> impl Strategy<Value = StudyRow> {
    (
        "[a-z0-9-]{1,12}",
        prop::bool::ANY,
        1e-8f64..1.0,
        prop::option::of(1e-16f64..1.0),
        0.0f64..100.0,
        (0usize..100_000, 0usize..1000, 0usize..1_000_000),
        any::<u64>(),
    )
        .prop_map(|(method, fixed, param, error, cpu, (steps, rejects, kdim), seed)| StudyRow {
            method,
            problem: "lorenz96".into(),
            mode: if fixed { Mode::Fixed } else { Mode::Adaptive },
            h: fixed.then_some(param),
            tol: (!fixed).then_some(param),
            status: if error.is_some() { Status::Ok } else { Status::Failed },
            error,
            cpu_seconds: cpu,
            steps,
            rejects,
            krylov_dim_total: kdim,
            seed,
        })
}

proptest! {
    #[test]
    fn csv_roundtrip(rows in prop::collection::vec(row_strategy(), 0..20)) {
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        prop_assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        prop_assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn streamed_csv_matches_one_shot(rows in prop::collection::vec(row_strategy(), 1..12), cut in 0usize..12) {
        let cut = cut.min(rows.len());
        let mut streamed = format!("{CSV_HEADER}\n").into_bytes();
        append_csv(&mut streamed, &rows[..cut]).unwrap();
        append_csv(&mut streamed, &rows[cut..]).unwrap();
        let mut one = Vec::new();
        write_csv(&mut one, &rows).unwrap();
        prop_assert_eq!(streamed, one);
    }

    #[test]
    fn geometric_sequences_halve(start in 1e-6f64..10.0, ratio in 1.1f64..8.0, count in 1usize..30) {
        let spec = format!("{start}:/{ratio}:{count}");
        let v = parse_geometric(&spec).unwrap();
        prop_assert_eq!(v.len(), count);
        prop_assert_eq!(v[0], start);
        for w in v.windows(2) {
            prop_assert!((w[0] / w[1] - ratio).abs() <= 1e-9 * ratio);
        }
    }

    #[test]
    fn slope_fit_recovers_power_laws(p in 0.5f64..5.0, c in 1e-3f64..1e3, n in 4usize..12, junk in 0usize..3) {
        let mut pts: Vec<(f64, Option<f64>)> = (0..junk).map(|k| (10.0 / 2f64.powi(k as i32), None)).collect();
        for k in 0..n {
            let h = 0.1 / 2f64.powi(k as i32);
            pts.push((h, Some(c * h.powf(p))));
        }
        let fit = fit_slope(&pts).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-9);
        prop_assert_eq!((fit.start, fit.len), (junk, n));
    }
}

#[test]
fn failed_rows_have_empty_error() {
    let row = StudyRow {
        method: "pepirkw3a".into(),
        problem: "semilinear".into(),
        mode: Mode::Fixed,
        h: Some(0.016),
        tol: None,
        error: None,
        cpu_seconds: 0.0,
        steps: 0,
        rejects: 0,
        krylov_dim_total: 0,
        status: Status::Failed,
        seed: 42,
    };
    let mut buf = Vec::new();
    write_csv(&mut buf, &[row]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(
        text.lines().nth(1).unwrap(),
        "pepirkw3a,semilinear,fixed,0.016,,,0.0,0,0,0,failed,42"
    );
}

#[test]
fn relative_error_is_scale_free() {
    let r = [3.0, 4.0];
    assert_eq!(relative_error(&[3.0, 4.0], &r), 0.0);
    assert!((relative_error(&[3.0, 4.5], &r) - 0.1).abs() < 1e-15);
    assert!((relative_error(&[300.0, 450.0], &[300.0, 400.0]) - 0.1).abs() < 1e-15);
}

#[test]
fn reference_prefers_closed_form() {
    let ivp = build(
        "semilinear",
        &ProblemParams {
            size: Some(20),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(reference_solution(&ivp, 0.1).unwrap(), semilinear_exact(20, 1.0));
}

#[test]
fn studies_are_reproducible_without_timing() {
    let ivp = build("lorenz96", &ProblemParams::default()).unwrap();
    let m = Method::builtin("pexpw3b").unwrap();
    let hs = parse_geometric("0.06:/2:5").unwrap();
    let reference = reference_solution(&ivp, hs[4]).unwrap();
    let opts = StudyOptions {
        seed: 42,
        no_timing: true,
        pool: None,
    };
    let a = convergence_study(&m, &ivp, &hs, &reference, &opts);
    let b = convergence_study(&m, &ivp, &hs, &reference, &opts);
    assert_eq!(a, b);
    assert!(a
        .rows
        .iter()
        .all(|r| r.status == Status::Ok && r.cpu_seconds == 0.0 && r.seed == 42));
    let slope = a.slope.as_ref().unwrap().slope;
    assert!((slope - 3.0).abs() < 0.15, "{slope}");

    let pool = std::sync::Arc::new(rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap());
    let par = StudyOptions {
        pool: Some(pool),
        ..opts.clone()
    };
    assert_eq!(convergence_study(&m, &ivp, &hs, &reference, &par), a);
    let tols = [1e-3, 1e-5];
    assert_eq!(
        work_precision_study(&m, &ivp, &tols, &reference, &par),
        work_precision_study(&m, &ivp, &tols, &reference, &opts)
    );
}
