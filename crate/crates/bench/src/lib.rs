//! Shared fixtures for the benchmarks.

use physadv_core::harness::{generate_synthetic_case, CaseName, SyntheticCase};
use physadv_core::{fit_scaler, init_network, train, Dataset, Network, NetworkConfig, TrainConfig};

/// Lift-balance data with a briefly trained network.
pub fn lift_fixture(n: usize, epochs: usize) -> (Dataset, SyntheticCase, Network) {
    let (data, case) = generate_synthetic_case(CaseName::LiftBalance, n, 0.05, 0).expect("synthetic case");
    let mut net = init_network(NetworkConfig {
        input_dim: data.schema.input_dim(),
        output_dim: data.schema.output_dim(),
        hidden: vec![32, 16],
        seed: 0,
    })
    .expect("network");
    net.set_scaler(fit_scaler(&data).expect("scaler")).expect("scaler shape");
    let cfg = TrainConfig {
        epochs,
        batch_size: 32,
        learning_rate: 1e-3,
        weight_decay: 0.0,
        seed: 0,
    };
    train(&mut net, &data, &cfg, None).expect("training");
    (data, case, net)
}
