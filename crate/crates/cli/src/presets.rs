//! Experiment configs shipped with the crate, addressable by name.

const PRESETS: [(&str, &str); 5] = [
    ("stability-eps0.002", include_str!("../../../presets/stability-eps0.002.toml")),
    ("decay-eps2", include_str!("../../../presets/decay-eps2.toml")),
    ("steady-eps0.5", include_str!("../../../presets/steady-eps0.5.toml")),
    (
        "oscillating-eps0.5-delta0.05",
        include_str!("../../../presets/oscillating-eps0.5-delta0.05.toml"),
    ),
    ("cross-eps0.5", include_str!("../../../presets/cross-eps0.5.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}
