use anyhow::Context;
use clap::Parser;
use cmcnn::cli::{resolve_config, Cli, Command};
use cmcnn::commands::{run_enumerate, run_report, run_search, run_train, RESULTS_FILE};
use cmcnn::core::compensatory::SearchMode;

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let config = cli.config.as_ref();
    match cli.command {
        Command::Search {
            flags,
            with_baseline,
        } => {
            let mut cfg = resolve_config(config, &flags)?;
            cfg.search.with_baseline |= with_baseline;
            let modes: &[SearchMode] = if cfg.search.with_baseline {
                &[SearchMode::Genetic, SearchMode::Random]
            } else {
                &[SearchMode::Genetic]
            };
            run_search(&cfg, modes, "search").context("search failed")?;
            print_tables(&cfg.output.out)?;
        }
        Command::Baseline { flags } => {
            let cfg = resolve_config(config, &flags)?;
            run_search(&cfg, &[SearchMode::Random], "baseline").context("baseline failed")?;
            print_tables(&cfg.output.out)?;
        }
        Command::Enumerate { flags, n, cap } => {
            let mut cfg = resolve_config(config, &flags)?;
            if let Some(cap) = cap {
                cfg.search.enumeration_cap = cap;
            }
            let (header, listing) = run_enumerate(&cfg, n)?;
            println!("{header}");
            for (rank, ind) in listing.ranked().into_iter().take(10).enumerate() {
                println!(
                    "{:>4}  {:<40} {:.4}",
                    rank + 1,
                    ind.genome.to_string(),
                    ind.fitness.unwrap_or(0.0)
                );
            }
        }
        Command::Report {
            results,
            out,
            models,
        } => {
            let out = out.unwrap_or_else(|| ".".into());
            print!("{}", run_report(&results, &out, models.as_deref())?);
        }
        Command::Train { flags, genome } => {
            let cfg = resolve_config(config, &flags)?;
            let (scores, path) = run_train(&cfg, &genome)?;
            println!(
                "{genome}: F1_train {:.4} F1_test {:.4} T_train {:.2} s T_predict {:.3} s, {} bytes -> {}",
                scores.f1_train,
                scores.f1_test,
                scores.t_train_seconds,
                scores.t_predict_seconds,
                scores.param_bytes,
                path.display()
            );
        }
    }
    Ok(())
}

fn print_tables(out: &std::path::Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(out.join("tables.txt")).with_context(|| {
        format!(
            "reading tables next to {}",
            out.join(RESULTS_FILE).display()
        )
    })?;
    print!("{text}");
    Ok(())
}
