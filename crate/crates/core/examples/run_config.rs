//! Parses a JSON run configuration and shows the derived model, training
//! and dataset settings. Invalid keys are reported by name.

use boundary_seg::config::RunConfig;

fn main() {
    let text = r#"{"seed": 3, "epochs": 10, "lambda3": 0.2, "lr_decay": {"every_epochs": 5, "gamma": 0.5}}"#;
    let config = RunConfig::from_json(text).expect("valid config");
    println!("model: {:?}", config.model_config());
    let train = config.train_config();
    println!(
        "lr at epochs 1, 6, 10: {}, {}, {}",
        train.lr_at(1),
        train.lr_at(6),
        train.lr_at(10)
    );
    println!(
        "dataset sizes: {:?}",
        (config.train_size, config.val_size, config.test_size)
    );

    for bad in [r#"{"epoch": 3}"#, r#"{"lambda2": -1}"#] {
        println!("{bad} -> {}", RunConfig::from_json(bad).unwrap_err());
    }
}
