use std::process::ExitCode;

use lightray::checks::{run_all, CheckConfig};

fn main() -> ExitCode {
    let reports = run_all(&CheckConfig::default());
    for r in &reports {
        println!("{r}");
    }
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    if failed.is_empty() {
        println!("acceptance: {} of {} criteria passed", reports.len(), reports.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
