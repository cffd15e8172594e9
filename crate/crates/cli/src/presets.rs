//! Study files shipped with the binary.

pub const NAMES: [&str; 6] = ["fig3", "fig4", "fig7b", "fig8", "fig9", "table1"];

pub fn get(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig3" => include_str!("../presets/fig3.toml"),
        "fig4" => include_str!("../presets/fig4.toml"),
        "fig7b" => include_str!("../presets/fig7b.toml"),
        "fig8" => include_str!("../presets/fig8.toml"),
        "fig9" => include_str!("../presets/fig9.toml"),
        "table1" => include_str!("../presets/table1.toml"),
        _ => return None,
    })
}
