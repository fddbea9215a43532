//! Small signature-recovery and RMSE studies written as CSV to stdout.

use wrapcop::experiments::{run_study, StudyConfig, StudyKind};
use wrapcop::GeneratorSpec;

fn main() -> wrapcop::Result<()> {
    let mut recovery = StudyConfig::new(
        StudyKind::SignatureRecovery,
        vec![2, 3],
        vec![50, 200],
        vec![GeneratorSpec::von_mises(5.0, 0.0)?],
    );
    recovery.replicates = 20;
    run_study(&recovery)?.write_csv(std::io::stdout().lock())?;

    let mut rmse = StudyConfig::new(
        StudyKind::Rmse,
        vec![2],
        vec![100, 1000],
        vec![GeneratorSpec::beta(2.0, 3.0)?],
    );
    rmse.replicates = 10;
    run_study(&rmse)?.write_csv(std::io::stdout().lock())?;
    Ok(())
}
