//! Drive a whole audit from a TOML config, as the `tabmia audit` command
//! does, and write the report files to a temporary directory.

use tabmia::audit::{cmd_audit, AuditConfig};

const CONFIG: &str = r#"
[dataset]
quasi_identifiers = ["sex", "region", "age_band"]

[dataset.synthetic]
rows = 800
seed = 1
single_outs = 10

[audit]
regimes = ["central_weak", "federated"]
kinds = ["logistic_regression", "gradient_boosted_trees"]
families = ["lira_offline", "rmia_offline", "metric_loss"]
bootstrap = 200

[seeds]
master = 3
sweep = 2

[attacks]
offline_references = 16
"#;

fn main() -> tabmia::Result<()> {
    let mut cfg = AuditConfig::from_toml(CONFIG)?;
    let out = std::env::temp_dir().join("tabmia_audit_example");
    cfg.audit.out = out.clone();
    let outcome = cmd_audit(&cfg, &out)?;
    print!("{}", outcome.message);
    println!("{} files written under {}", outcome.files.len(), out.display());
    Ok(())
}
