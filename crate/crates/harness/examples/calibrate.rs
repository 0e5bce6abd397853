//! Recompute the acceptance constants at n = 8 and print them as JSON.

fn main() {
    let cal = ssle_harness::calibration::calibrate();
    println!(
        "{}",
        serde_json::to_string_pretty(&cal).expect("serializable")
    );
}
