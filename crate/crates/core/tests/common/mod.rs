#![allow(dead_code)]

use std::path::PathBuf;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

pub fn read_config(name: &str) -> String {
    std::fs::read_to_string(config_path(name)).expect("config file is readable")
}
