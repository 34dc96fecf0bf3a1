//! Prints summaries for the bundled presets and the time-triggered baseline.

use mgsync::analysis::{compare, simulate};
use mgsync::presets::Preset;

fn main() {
    for preset in Preset::ALL {
        let scenario = preset.scenario().expect("preset");
        let (_, summary) = simulate(&scenario).expect("run");
        println!("== {preset}");
        println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    }
    let report = compare(&Preset::Case2.scenario().unwrap()).unwrap();
    println!("{report}");
}
