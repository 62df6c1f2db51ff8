mod common;

use bsg::autodiff::finite_diff_check;
use bsg::graph::{generate_sbm, Graph, SbmConfig};
use bsg::losses::{bsg_total, LossWeights};
use bsg::trainer::{
    bsg_objective, epoch_seed, initial_params, sample_epoch_inputs, train, ParamVars, Pretext, TrainConfig,
    TrainingContext,
};

use common::desk_config;

fn fixture() -> Graph {
    generate_sbm(&SbmConfig::fixture(1)).unwrap()
}

fn final_delta(graph: &Graph, cfg: &TrainConfig) -> f64 {
    train(graph, cfg).unwrap().history.epochs.last().unwrap().delta
}

#[test]
fn two_hundred_epochs_lower_the_objective() {
    let cfg = TrainConfig {
        epochs: 200,
        ..desk_config(0)
    };
    let history = train(&fixture(), &cfg).unwrap().history;
    let (first, last) = (history.epochs[0].losses.total, history.epochs[199].losses.total);
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn reported_total_matches_its_parts_every_epoch() {
    let cfg = TrainConfig {
        epochs: 40,
        ..desk_config(2)
    };
    let w = cfg.weights();
    for rec in train(&fixture(), &cfg).unwrap().history.epochs {
        let l = rec.losses;
        let recomputed = l.l_st + w.lambda1 * l.l_nei + w.lambda2 * l.l_min + w.lambda3 * l.l_div;
        assert!((l.total - recomputed).abs() <= 1e-12 * recomputed.abs().max(1.0));
        assert!(rec.delta >= 0.0 && rec.delta.is_finite());
    }
}

#[test]
fn zero_weights_reduce_to_the_autoencoder_objective() {
    let cfg = TrainConfig {
        epochs: 30,
        ..desk_config(1)
    }
    .with_weights(LossWeights {
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
        ..LossWeights::cora_defaults()
    });
    for rec in train(&fixture(), &cfg).unwrap().history.epochs {
        assert_eq!(rec.losses.total, rec.losses.l_st);
    }
}

#[test]
fn training_is_bit_reproducible() {
    let cfg = TrainConfig {
        epochs: 25,
        ..desk_config(9)
    };
    let graph = fixture();
    let (a, b) = (train(&graph, &cfg).unwrap(), train(&graph, &cfg).unwrap());
    assert_eq!(a.embeddings.as_slice(), b.embeddings.as_slice());
    for (x, y) in a.history.epochs.iter().zip(&b.history.epochs) {
        assert_eq!(x.losses, y.losses);
        assert_eq!(x.delta, y.delta);
    }
}

#[test]
fn neighbor_term_lowers_final_smoothness() {
    let graph = fixture();
    let cfg = desk_config(0);
    let with = final_delta(&graph, &cfg);
    let without = final_delta(&graph, &TrainConfig { lambda1: 0.0, ..cfg });
    assert!(with < without, "lambda1 > 0: {with}, lambda1 = 0: {without}");
}

// Known to fail at the default weights: with the minimal term active the
// divergence term also shrinks the embedding, so δ ends lower.
#[test]
fn divergence_term_without_neighbor_term_raises_final_smoothness() {
    let graph = fixture();
    let cfg = TrainConfig {
        lambda1: 0.0,
        ..desk_config(0)
    };
    let with = final_delta(&graph, &cfg);
    let without = final_delta(&graph, &TrainConfig { lambda3: 0.0, ..cfg });
    assert!(with > without, "lambda3 > 0: {with}, lambda3 = 0: {without}");
}

#[test]
fn full_objective_passes_gradient_check_at_first_epoch() {
    let graph = generate_sbm(&SbmConfig {
        blocks: 2,
        nodes_per_block: 6,
        p_in: 0.6,
        p_out: 0.1,
        feature_dim: 5,
        feature_noise: 0.5,
        seed: 3,
    })
    .unwrap();
    assert_eq!(graph.num_nodes(), 12);
    for pretext in [Pretext::EdgeRecon, Pretext::FeatureRecon] {
        let cfg = TrainConfig {
            hidden: 6,
            emb_dim: 4,
            decoder_hidden: 3,
            epochs: 1,
            lambda1: 0.3,
            lambda2: 0.2,
            lambda3: 0.5,
            pretext,
            ..TrainConfig::default()
        };
        let ctx = TrainingContext::new(&graph).unwrap();
        let inputs = sample_epoch_inputs(&ctx, &cfg, epoch_seed(&cfg, 0)).unwrap();
        let params: Vec<_> = initial_params(&cfg, graph.feature_dim())
            .unwrap()
            .tensors()
            .into_iter()
            .cloned()
            .collect();
        let weights = cfg.weights();
        let check = finite_diff_check(&params, 1e-5, |tape, vars| {
            let obj = bsg_objective(tape, &ctx, &inputs, ParamVars::from_slice(vars)?, &weights)?;
            Ok(obj.total)
        })
        .unwrap();
        assert!(check.max_rel_error < 1e-4, "{pretext:?}: {check:?}");
    }
}

#[test]
fn loss_breakdown_rejects_negative_weights() {
    let parts = bsg::losses::LossParts {
        l_st: 1.0,
        l_nei: 1.0,
        l_min: 1.0,
        l_div: 1.0,
    };
    let bad = LossWeights {
        lambda2: -0.1,
        ..LossWeights::cora_defaults()
    };
    assert!(bsg_total(parts, &bad).is_err());
}
