use std::path::Path;

use vr3pm::harness::io::read_instance;
use vr3pm::harness::{run_experiment, AlgorithmSpec, ExperimentConfig, InstanceSource};
use vr3pm::instances::GeneratorSpec;
use vr3pm::solvers::{Algorithm, Budget};
use vr3pm::trace::{read_csv, CSV_HEADER};

fn small_config(seeds: Vec<u64>, budget: Budget, out: Option<&Path>) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        InstanceSource::Generate {
            spec: GeneratorSpec::lcqp(10, 10, 4, 2, 0),
            fixed_seed: false,
        },
        vec![AlgorithmSpec::new(Algorithm::Vr3pm), AlgorithmSpec::new(Algorithm::R2pm1)],
        seeds,
        budget,
    );
    c.out_dir = out.map(Path::to_path_buf);
    c
}

#[test]
fn ten_iterations_give_eleven_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(vec![3], Budget::Iterations(10), Some(dir.path()));
    c.algorithms.truncate(1);
    let outcome = run_experiment(&c).unwrap();
    assert_eq!(outcome.traces.len(), 1);
    let csv = dir.path().join("vr3pm_seed3.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let rows = read_csv(&csv).unwrap();
    assert_eq!(rows.iter().map(|r| r.iter).collect::<Vec<_>>(), (0..=10).collect::<Vec<_>>());
    assert_eq!(rows, outcome.traces[0].rows);
    assert!(dir.path().join("summary.json").exists());
    let inst = read_instance(&dir.path().join("instance_seed3.json")).unwrap();
    assert!(inst.metadata().reference.is_some());
    assert_eq!(inst.metadata().seed, Some(3));
}

#[test]
fn summaries_take_medians_over_seeds() {
    let outcome = run_experiment(&small_config(vec![1, 2], Budget::GradEvals(400), None)).unwrap();
    assert_eq!(outcome.summary.instances.len(), 2);
    for (ai, summary) in outcome.summary.algorithms.iter().enumerate() {
        assert_eq!(summary.runs, 2);
        let finals: Vec<f64> = outcome.summary.runs[ai * 2..ai * 2 + 2]
            .iter()
            .map(|r| r.final_f_gap_average.unwrap())
            .collect();
        let expected = 0.5 * (finals[0] + finals[1]);
        assert!((summary.median_final_f_gap_average.unwrap() - expected).abs() <= 1e-15 * expected.abs().max(1.0));
    }
    for run in &outcome.summary.runs {
        assert!(run.grad_evals >= 400);
    }
}

#[test]
fn traces_are_reproducible_apart_from_timing() {
    let a = run_experiment(&small_config(vec![5], Budget::Iterations(50), None)).unwrap();
    let b = run_experiment(&small_config(vec![5], Budget::Iterations(50), None)).unwrap();
    for (ta, tb) in a.traces.iter().zip(&b.traces) {
        let strip = |t: &vr3pm::trace::RunTrace| t.rows.iter().map(|r| (r.iter, r.grad_evals, r.f_gap_average.to_bits(), r.dist2_c_average.to_bits())).collect::<Vec<_>>();
        assert_eq!(strip(ta), strip(tb));
        assert_eq!(ta.summary.final_iterate, tb.summary.final_iterate);
    }
}

#[test]
fn config_files_parse_with_overrides() {
    let text = r#"{
        "instance": {"kind": "generate", "spec": {"family": "qcqp", "n": 8, "m": 10, "d": 3, "p": 2, "q": 2}},
        "algorithms": ["vr3pm", {"algorithm": "rpm-wb", "relaxation": 1.5}],
        "seeds": [1],
        "budget": {"iterations": 20}
    }"#;
    let c = ExperimentConfig::from_json(text).unwrap();
    let outcome = run_experiment(&c).unwrap();
    assert_eq!(outcome.traces.len(), 2);
    assert_eq!(outcome.traces[1].header.relaxation, 1.5);
    assert_eq!(outcome.traces[1].header.grouping, None);
}
