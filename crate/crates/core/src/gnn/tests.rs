use super::*;
use crate::graph::{hamiltonian_to_graph, GraphEdge};
use crate::models::{heisenberg_xyz, InstanceMeta};
use crate::pauli::PauliSum;

fn graph(n: usize, width: usize, features: Vec<f64>, edges: &[(usize, usize, f64)]) -> HamiltonianGraph {
    let app = Application::HeisenbergXYZ;
    let meta = InstanceMeta::new(app, 0, 4, &[0.0; 3]).unwrap();
    assert_eq!(features.len(), n * width);
    HamiltonianGraph {
        meta,
        n_nodes: n,
        features,
        edges: edges.iter().map(|&(s, d, w)| GraphEdge { src: s, dst: d, weight: (w, 0.0) }).collect(),
    }
}

fn small_config(seed: u64) -> GnnConfig {
    GnnConfig {
        gcn_hidden: 6,
        gat_hidden: 5,
        mlp_hidden: 7,
        gat_heads: 2,
        epochs: 0,
        batch_size: 2,
        ..GnnConfig::for_application(Application::HeisenbergXYZ, seed)
    }
}

fn three_node_graph() -> HamiltonianGraph {
    let feats = vec![
        0.25, 4.0, 0.3, -1.2, 0.7, //
        0.5, 4.0, 0.3, -1.2, 0.7, //
        0.75, 4.0, 0.3, -1.2, 0.7,
    ];
    graph(3, 5, feats, &[(0, 1, 1.5), (1, 0, 1.5), (1, 2, 0.4), (2, 1, 0.4), (2, 2, 2.0)])
}

fn eye(n: usize) -> Array2<f64> {
    Array2::eye(n)
}

fn run_gcn(g: &HamiltonianGraph, x: Array2<f64>) -> Array2<f64> {
    let s = GraphStructure::new(g).unwrap();
    let d = x.ncols();
    let mut t = Tape::new();
    let x = t.constant(x);
    let w = t.constant(eye(d));
    let b = t.constant(Array2::zeros((1, d)));
    let y = gcn_forward(&mut t, x, &s, w, b).unwrap();
    t.value(y).clone()
}

#[test]
fn gcn_single_node_is_relu() {
    let g = graph(1, 3, vec![1.0, -2.0, 0.5], &[]);
    let y = run_gcn(&g, Array2::from_shape_vec((1, 3), vec![1.0, -2.0, 0.5]).unwrap());
    assert_eq!(y.row(0).to_vec(), vec![1.0, 0.0, 0.5]);
}

#[test]
fn gcn_two_identical_nodes() {
    let g = graph(2, 2, vec![0.0; 4], &[(0, 1, 1.0), (1, 0, 1.0)]);
    let x = Array2::from_shape_vec((2, 2), vec![0.7, -0.3, 0.7, -0.3]).unwrap();
    let y = run_gcn(&g, x);
    for r in 0..2 {
        assert!((y[(r, 0)] - 0.7).abs() < 1e-15 && y[(r, 1)] == 0.0);
    }
}

#[test]
fn gcn_path_graph_matches_hand_aggregation() {
    // Path 0 - 1 - 2 with unit weights: Ã has degrees (2, 3, 2).
    let g = graph(3, 1, vec![0.0; 3], &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)]);
    let x = Array2::from_shape_vec((3, 1), vec![1.0, 2.0, 4.0]).unwrap();
    let y = run_gcn(&g, x);
    let s6 = 6f64.sqrt();
    let expect = [1.0 / 2.0 + 2.0 / s6, 1.0 / s6 + 2.0 / 3.0 + 4.0 / s6, 2.0 / s6 + 4.0 / 2.0];
    for (i, e) in expect.iter().enumerate() {
        assert!((y[(i, 0)] - e).abs() < 1e-14, "node {i}: {} vs {e}", y[(i, 0)]);
    }
}

#[test]
fn gcn_regular_graph_stays_in_input_range() {
    // 4-cycle with uniform weights: every row of the normalized operator sums to one.
    let edges: Vec<_> = (0..4).flat_map(|i| [(i, (i + 1) % 4, 0.8), ((i + 1) % 4, i, 0.8)]).collect();
    let g = graph(4, 1, vec![0.0; 4], &edges);
    let x = Array2::from_shape_vec((4, 1), vec![0.5, 3.0, 1.0, 2.0]).unwrap();
    let y = run_gcn(&g, x);
    assert!(y.iter().all(|&v| (0.5..=3.0).contains(&v)));
}

fn run_gat(g: &HamiltonianGraph, x: Array2<f64>, w: Array2<f64>, a_dst: Vec<f64>, a_src: Vec<f64>) -> (Array2<f64>, Vec<f64>) {
    let s = GraphStructure::new(g).unwrap();
    let f = w.ncols();
    let mut t = Tape::new();
    let x = t.constant(x);
    let head = HeadVars {
        w: t.constant(w),
        a_dst: t.constant(Array2::from_shape_vec((f, 1), a_dst).unwrap()),
        a_src: t.constant(Array2::from_shape_vec((f, 1), a_src).unwrap()),
    };
    let b = t.constant(Array2::zeros((1, f)));
    let (y, alphas) = gat_forward(&mut t, x, &s, &[head], b).unwrap();
    (t.value(y).clone(), t.value(alphas[0]).iter().copied().collect())
}

#[test]
fn gat_identical_features_attend_uniformly() {
    let g = three_node_graph();
    let x = Array2::from_shape_fn((3, 2), |(_, j)| [0.3, -0.8][j]);
    let s = GraphStructure::new(&g).unwrap();
    let (_, alpha) = run_gat(&g, x, eye(2), vec![0.4, 1.1], vec![-0.9, 0.2]);
    let mut sizes = [0usize; 3];
    s.attention_pairs().for_each(|(d, _)| sizes[d] += 1);
    for ((d, _), a) in s.attention_pairs().zip(alpha) {
        assert!((a - 1.0 / sizes[d] as f64).abs() < 1e-15);
    }
}

#[test]
fn gat_single_node_is_relu_of_projection() {
    let g = graph(1, 2, vec![0.0; 2], &[]);
    let x = Array2::from_shape_vec((1, 2), vec![1.0, 2.0]).unwrap();
    let w = Array2::from_shape_vec((2, 2), vec![1.0, -1.0, 0.5, -3.0]).unwrap();
    let (y, alpha) = run_gat(&g, x, w, vec![0.3, 0.3], vec![0.1, 0.2]);
    assert_eq!(alpha, vec![1.0]);
    assert_eq!(y.row(0).to_vec(), vec![2.0, 0.0]);
}

#[test]
fn gat_two_nodes_match_hand_chain() {
    let g = graph(2, 1, vec![0.0; 2], &[(0, 1, 1.0), (1, 0, 1.0)]);
    let x = Array2::from_shape_vec((2, 1), vec![1.0, -2.0]).unwrap();
    let w = Array2::from_shape_vec((1, 1), vec![1.5]).unwrap();
    let (ad, as_) = (0.7, -0.4);
    let (y, _) = run_gat(&g, x, w, vec![ad], vec![as_]);
    let wh = [1.5, -3.0];
    let leaky = |v: f64| if v > 0.0 { v } else { 0.2 * v };
    for i in 0..2 {
        let scores: Vec<f64> = (0..2).map(|j| leaky(ad * wh[i] + as_ * wh[j])).collect();
        let z: f64 = scores.iter().map(|s| s.exp()).sum();
        let out: f64 = (0..2).map(|j| scores[j].exp() / z * wh[j]).sum();
        assert!((y[(i, 0)] - out.max(0.0)).abs() < 1e-14);
    }
}

#[test]
fn attention_rows_sum_to_one_for_every_head() {
    let model = GnnModel::new(small_config(3)).unwrap();
    let g = three_node_graph();
    let s = GraphStructure::new(&g).unwrap();
    let pass = model.forward(&[&g], &s).unwrap();
    for layer in &pass.attention {
        for &alpha in layer {
            let mut sums = [0.0; 3];
            for ((d, _), a) in s.attention_pairs().zip(pass.tape.value(alpha).iter()) {
                sums[d] += a;
            }
            assert!(sums.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }
}

#[test]
fn full_size_output_shapes() {
    for (app, n) in [(Application::HeisenbergXYZ, 8), (Application::Ising2D, 16), (Application::RandomVQE, 48)] {
        let cfg = GnnConfig { gcn_hidden: 8, gat_hidden: 8, mlp_hidden: 8, ..GnnConfig::for_application(app, 0) };
        let model = GnnModel::new(cfg).unwrap();
        let meta = InstanceMeta::new(app, 0, 4, &vec![0.5; app.param_names().len()]).unwrap();
        let h = PauliSum::from_real(4, &[(1.0, "ZZII"), (0.5, "XIIX")]).unwrap();
        let g = hamiltonian_to_graph(&h, &meta).unwrap();
        let out = model.predict_init(&g).unwrap();
        assert_eq!(out.len(), n);
        assert!(out.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn mismatched_application_is_incompatible() {
    let model = GnnModel::new(small_config(0)).unwrap();
    let meta = InstanceMeta::new(Application::H2, 0, 4, &[0.74]).unwrap();
    let g = hamiltonian_to_graph(&PauliSum::from_real(4, &[(1.0, "ZIII")]).unwrap(), &meta).unwrap();
    assert!(matches!(model.predict_init(&g), Err(Error::Compatibility(_))));
    let bad = GnnConfig { out_dim: 9, ..small_config(0) };
    assert!(matches!(GnnModel::new(bad), Err(Error::Compatibility(_))));
}

#[test]
fn permutation_invariance() {
    let model = GnnModel::new(small_config(11)).unwrap();
    let meta = InstanceMeta::new(Application::HeisenbergXYZ, 0, 4, &[0.4, -1.3, 2.1]).unwrap();
    let g = hamiltonian_to_graph(&heisenberg_xyz(4, 0.4, -1.3, 2.1).unwrap(), &meta).unwrap();
    let base = model.model_forward(&g).unwrap();
    let perm: Vec<usize> = (0..16).map(|i| (i * 5 + 3) % 16).collect();
    let out = model.model_forward(&g.permuted(&perm).unwrap()).unwrap();
    for (a, b) in base.iter().zip(&out) {
        assert!((a - b).abs() <= 1e-9);
    }
}

fn graph_of(terms: &[(f64, &str)]) -> HamiltonianGraph {
    let meta = InstanceMeta::new(Application::HeisenbergXYZ, 0, 4, &[1.0, 1.0, 1.0]).unwrap();
    hamiltonian_to_graph(&PauliSum::from_real(4, terms).unwrap(), &meta).unwrap()
}

fn seeds_separating(a: &HamiltonianGraph, b: &HamiltonianGraph) -> usize {
    (0..100)
        .filter(|&seed| {
            let cfg = GnnConfig { gcn_hidden: 64, gat_hidden: 64, mlp_hidden: 64, gat_heads: 4, ..small_config(seed) };
            let model = GnnModel::new(cfg).unwrap();
            let (x, y) = (model.model_forward(a).unwrap(), model.model_forward(b).unwrap());
            x.iter().zip(&y).any(|(p, q)| (p - q).abs() > 1e-12)
        })
        .count()
}

#[test]
fn structurally_different_graphs_are_distinguished() {
    let gi = graph_of(&[(1.0, "IIII")]);
    let gx = graph_of(&[(1.0, "XIII")]);
    assert!(seeds_separating(&gi, &gx) >= 99);
}

#[test]
fn sign_only_differences_are_invisible_to_magnitude_adjacency() {
    // I and Z differ only in the sign of diagonal entries, which the
    // magnitude weighting discards.
    let gi = graph_of(&[(1.0, "IIII")]);
    let gz = graph_of(&[(1.0, "ZIII")]);
    assert_ne!(gi.edges, gz.edges);
    assert_eq!(seeds_separating(&gi, &gz), 0);
}

#[test]
fn full_stack_gradients_match_finite_differences() {
    let model = GnnModel::new(small_config(5)).unwrap();
    let g = three_node_graph();
    let s = GraphStructure::new(&g).unwrap();
    let target = Array2::from_shape_fn((1, 8), |(_, j)| 0.1 * j as f64 - 0.3);
    let loss_of = |m: &GnnModel| {
        let mut pass = m.forward(&[&g], &s).unwrap();
        let t = pass.tape.constant(target.clone());
        let l = pass.tape.mse(pass.output, t).unwrap();
        pass.tape.value(l)[(0, 0)]
    };
    let analytic: Vec<Array2<f64>> = {
        let mut pass = model.forward(&[&g], &s).unwrap();
        let t = pass.tape.constant(target.clone());
        let l = pass.tape.mse(pass.output, t).unwrap();
        let mut grads = pass.tape.backward(l).unwrap();
        let vars = pass.param_vars().to_vec();
        vars.iter().map(|&v| grads.take(v).unwrap()).collect()
    };
    let h = 1e-6;
    let n_tensors = analytic.len();
    let mut checked = 0;
    for ti in 0..n_tensors {
        let len = analytic[ti].len();
        for k in 0..len {
            let mut m = model.clone();
            m.params_mut()[ti].values_mut()[k] += h;
            let plus = loss_of(&m);
            m.params_mut()[ti].values_mut()[k] -= 2.0 * h;
            let minus = loss_of(&m);
            let fd = (plus - minus) / (2.0 * h);
            let a = analytic[ti].as_slice().unwrap()[k];
            assert!(
                (fd - a).abs() <= 1e-4 * (fd.abs() + a.abs()) + 1e-8,
                "{} [{k}]: fd {fd} vs {a}",
                model.named_params()[ti].0
            );
            checked += 1;
        }
    }
    assert_eq!(checked, model.n_weights());
}

fn toy_dataset() -> Vec<(HamiltonianGraph, Vec<f64>)> {
    (0..3)
        .map(|i| {
            let j = [0.5 + i as f64, -1.0, 0.3 * i as f64];
            let meta = InstanceMeta::new(Application::HeisenbergXYZ, i, 4, &j).unwrap();
            let g = hamiltonian_to_graph(&heisenberg_xyz(4, j[0], j[1], j[2]).unwrap(), &meta).unwrap();
            (g, (0..8).map(|k| (k as f64 * 0.2 + i as f64).sin()).collect())
        })
        .collect()
}

#[test]
fn memorizes_a_single_graph() {
    let data = toy_dataset();
    let cfg = GnnConfig { epochs: 200, batch_size: 1, gcn_hidden: 16, gat_hidden: 16, mlp_hidden: 32, ..small_config(1) };
    let mut model = GnnModel::new(cfg).unwrap();
    let report = train(&mut model, &data[..1], &[]).unwrap();
    let first = report.epochs[0].train_mse;
    let last = report.epochs.last().unwrap().train_mse;
    assert!(last * 10.0 <= first, "{first} -> {last}");
}

#[test]
fn zero_epochs_reports_initial_loss_only() {
    let data = toy_dataset();
    let mut model = GnnModel::new(small_config(2)).unwrap();
    let before = model.clone();
    let report = train(&mut model, &data[..2], &data[2..]).unwrap();
    assert!(report.epochs.is_empty());
    assert_eq!(report.best_epoch, 0);
    assert!(report.initial_val_mse.is_some());
    assert_eq!(model, before);
}

#[test]
fn training_is_deterministic_and_checkpoints_round_trip() {
    let data = toy_dataset();
    let cfg = GnnConfig { epochs: 5, ..small_config(9) };
    let mut a = GnnModel::new(cfg.clone()).unwrap();
    let mut b = GnnModel::new(cfg).unwrap();
    let ra = train(&mut a, &data[..2], &data[2..]).unwrap();
    let rb = train(&mut b, &data[..2], &data[2..]).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    a.save(dir.path()).unwrap();
    let loaded = GnnModel::load(dir.path()).unwrap();
    assert_eq!(loaded, a);
}

#[test]
fn wrong_label_length_is_rejected() {
    let mut data = toy_dataset();
    data[0].1.pop();
    let mut model = GnnModel::new(small_config(0)).unwrap();
    assert!(matches!(train(&mut model, &data, &[]), Err(Error::Shape(_))));
}

#[test]
fn batched_forward_matches_single_graphs() {
    for readout in [Readout::Mean, Readout::Sum, Readout::Max] {
        let model = GnnModel::new(GnnConfig { readout, ..small_config(2) }).unwrap();
        let a = three_node_graph();
        let b = graph_of(&[(1.0, "XIII"), (-0.5, "ZZII")]);
        let batched = model.forward_batch(&[&a, &b, &a]).unwrap();
        for (row, g) in [&a, &b, &a].iter().enumerate() {
            let single = model.model_forward(g).unwrap();
            for (j, v) in single.iter().enumerate() {
                assert!((batched[(row, j)] - v).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn batched_gradients_are_the_mean_of_per_graph_gradients() {
    let model = GnnModel::new(small_config(4)).unwrap();
    let graphs = [three_node_graph(), graph_of(&[(1.0, "XIII"), (-0.5, "ZZII")])];
    let targets: Vec<Vec<f64>> = (0..2).map(|k| (0..8).map(|j| 0.1 * (j + k) as f64).collect()).collect();
    let grads_of = |gs: &[&HamiltonianGraph], ts: &[&Vec<f64>]| {
        let s = GraphStructure::batch(gs).unwrap();
        let mut pass = model.forward(gs, &s).unwrap();
        let flat: Vec<f64> = ts.iter().flat_map(|t| t.iter().copied()).collect();
        let t = pass.tape.constant(Array2::from_shape_vec((gs.len(), 8), flat).unwrap());
        let l = pass.tape.mse(pass.output, t).unwrap();
        let mut grads = pass.tape.backward(l).unwrap();
        let vars = pass.param_vars().to_vec();
        vars.iter().map(|&v| grads.take(v).unwrap()).collect::<Vec<_>>()
    };
    let both = grads_of(&[&graphs[0], &graphs[1]], &[&targets[0], &targets[1]]);
    let a = grads_of(&[&graphs[0]], &[&targets[0]]);
    let b = grads_of(&[&graphs[1]], &[&targets[1]]);
    for ((g, x), y) in both.iter().zip(&a).zip(&b) {
        let mean = (x + y) * 0.5;
        assert!(g.iter().zip(mean.iter()).all(|(p, q)| (p - q).abs() <= 1e-12 * (1.0 + q.abs())));
    }
}
