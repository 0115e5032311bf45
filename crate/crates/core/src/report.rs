//! Human-readable renderings of the audit artifacts: aligned text tables
//! for evaluation metrics, TF-IDF contrasts, attribution rankings, and
//! flip counts, plus the combined markdown audit summary.

use crate::attribution::TokenRanking;
use crate::features::{TfidfReport, TfidfRow};
use crate::flip::FlipTable;
use crate::model::EvalReport;
use crate::types::{Gender, PartOfSpeech};
use std::fmt::Write;

const POS_ORDER: [PartOfSpeech; 5] = [
    PartOfSpeech::Adjective,
    PartOfSpeech::Noun,
    PartOfSpeech::Verb,
    PartOfSpeech::Pronoun,
    PartOfSpeech::Other,
];

fn title_word(pos: PartOfSpeech) -> &'static str {
    match pos {
        PartOfSpeech::Adjective => "Adjectives",
        PartOfSpeech::Noun => "Nouns",
        PartOfSpeech::Verb => "Verbs",
        PartOfSpeech::Pronoun => "Pronouns",
        PartOfSpeech::Other => "Other",
    }
}

pub fn render_eval_text(title: &str, report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:<8} {:>10} {:>10} {:>10} {:>8}",
        "Gender", "Precision", "Recall", "F1", "Support"
    );
    for (label, m) in [("Female", &report.female), ("Male", &report.male)] {
        let _ = writeln!(
            out,
            "{:<8} {:>10.3} {:>10.3} {:>10.3} {:>8}",
            label, m.precision, m.recall, m.f1, m.support
        );
    }
    let _ = writeln!(out, "Accuracy        {:>10.3}", report.accuracy);
    let _ = writeln!(
        out,
        "Macro           P {:>6.3}  R {:>6.3}  F1 {:>6.3}",
        report.macro_avg.precision, report.macro_avg.recall, report.macro_avg.f1
    );
    let _ = writeln!(
        out,
        "Weighted        P {:>6.3}  R {:>6.3}  F1 {:>6.3}",
        report.weighted_avg.precision, report.weighted_avg.recall, report.weighted_avg.f1
    );
    let c = &report.confusion;
    let _ = writeln!(
        out,
        "Confusion       pred_f/label_f {}  pred_f/label_m {}  pred_m/label_f {}  pred_m/label_m {}",
        c.pred_female_label_female,
        c.pred_female_label_male,
        c.pred_male_label_female,
        c.pred_male_label_male
    );
    out
}

fn tfidf_table(out: &mut String, title: &str, rows: &[TfidfRow]) {
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:<18} {:>10} {:>10} {:>10}",
        "Token", "Female", "Male", "Diff"
    );
    for row in rows {
        let _ = writeln!(
            out,
            "{:<18} {:>10.6} {:>10.6} {:>10.6}",
            row.token, row.score_female, row.score_male, row.diff
        );
    }
    let _ = writeln!(out);
}

pub fn render_tfidf_text(report: &TfidfReport) -> String {
    let mut out = String::new();
    for pos in POS_ORDER {
        if let Some(rows) = report.male_tables.get(&pos) {
            tfidf_table(&mut out, &format!("Male {}", title_word(pos)), rows);
        }
    }
    for pos in POS_ORDER {
        if let Some(rows) = report.female_tables.get(&pos) {
            tfidf_table(&mut out, &format!("Female {}", title_word(pos)), rows);
        }
    }
    out
}

pub fn render_rankings_text(male: &TokenRanking, female: &TokenRanking) -> String {
    let mut out = String::new();
    for ranking in [male, female] {
        let direction = match ranking.direction {
            Gender::Male => "Male",
            Gender::Female => "Female",
        };
        for pos in POS_ORDER {
            let Some(rows) = ranking.groups.get(&pos) else {
                continue;
            };
            let _ = writeln!(
                out,
                "{} {} (top {}, support >= {})",
                direction,
                title_word(pos),
                ranking.top_k,
                ranking.min_support
            );
            let _ = writeln!(out, "{:<18} {:>12} {:>8}", "Token", "Mean SHAP", "Support");
            for row in rows {
                let _ = writeln!(
                    out,
                    "{:<18} {:>12.6} {:>8}",
                    row.token, row.mean_shap, row.support
                );
            }
            let _ = writeln!(out);
        }
    }
    out
}

pub fn render_flip_text(title: &str, table: &FlipTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "(subset size {}, averaged over {} runs)",
        table.subset_size, table.runs
    );
    if let Some(warning) = &table.warning {
        let _ = writeln!(out, "warning: {warning}");
    }
    let _ = writeln!(
        out,
        "{:<18} {:>12} {:>12} {:>20}",
        "Token", "F -> M", "M -> F", "Absolute Difference"
    );
    for row in &table.rows {
        let _ = writeln!(
            out,
            "{:<18} {:>12.2} {:>12.2} {:>20.2}",
            row.token, row.f_to_m, row.m_to_f, row.abs_diff
        );
    }
    out
}

/// Stage-by-stage markdown summary: one row per dataset, accuracy and
/// macro metrics as columns, followed by the detailed tables.
pub fn render_audit_markdown(report: &crate::audit::AuditReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Gender-leakage audit");
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "- corpus: {} letters ({} female / {} male), provenance `{}`",
        report.corpus.letters, report.corpus.female, report.corpus.male, report.corpus.provenance
    );
    let _ = writeln!(out, "- classifier: `{:?}`", report.config.kind);
    let _ = writeln!(out, "- seed: {}", report.seed);
    let _ = writeln!(out, "- tool version: {}", report.tool_version);
    let _ = writeln!(out);
    let _ = writeln!(out, "## Classifier performance by dataset");
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "| Dataset | Acc. | Macro P | Macro R | Macro F1 | Wtd. F1 |"
    );
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    let rows = [
        ("Original (non-EDG)", &report.stages.baseline),
        ("EDG (baseline)", &report.stages.edg),
        ("EDG w/o SHAP tokens", &report.stages.edg_minus_shap),
        ("EDG w/o TF-IDF tokens", &report.stages.edg_minus_tfidf),
    ];
    for (name, stage) in rows {
        let e = &stage.eval;
        let _ = writeln!(
            out,
            "| {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |",
            name,
            e.accuracy,
            e.macro_avg.precision,
            e.macro_avg.recall,
            e.macro_avg.f1,
            e.weighted_avg.f1
        );
    }
    let _ = writeln!(out);
    let d = &report.deltas;
    let _ = writeln!(
        out,
        "## Macro-F1 deltas (drop relative to the earlier stage)"
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "- EDG vs original: {:+.3}",
        -d.edg_vs_baseline_macro_f1
    );
    let _ = writeln!(
        out,
        "- EDG w/o SHAP tokens vs EDG: {:+.3}",
        -d.shap_vs_edg_macro_f1
    );
    let _ = writeln!(
        out,
        "- EDG w/o TF-IDF tokens vs EDG: {:+.3}",
        -d.tfidf_vs_edg_macro_f1
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "## Masked token sets");
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "- SHAP-selected ({}): {}",
        report.stages.edg_minus_shap.masked_tokens.len(),
        report.stages.edg_minus_shap.masked_tokens.join(", ")
    );
    let _ = writeln!(
        out,
        "- TF-IDF-selected ({}): {}",
        report.stages.edg_minus_tfidf.masked_tokens.len(),
        report.stages.edg_minus_tfidf.masked_tokens.join(", ")
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "## Attribution rankings (mean SHAP per token)");
    let _ = writeln!(out);
    let _ = writeln!(out, "```");
    out.push_str(&render_rankings_text(
        &report.shap_male,
        &report.shap_female,
    ));
    let _ = writeln!(out, "```");
    let _ = writeln!(out);
    let _ = writeln!(out, "## TF-IDF contrasts");
    let _ = writeln!(out);
    let _ = writeln!(out, "```");
    out.push_str(&render_tfidf_text(&report.tfidf));
    let _ = writeln!(out, "```");
    let _ = writeln!(out);
    let _ = writeln!(out, "## Prediction flips");
    let _ = writeln!(out);
    let _ = writeln!(out, "```");
    out.push_str(&render_flip_text(
        "Flips when masking SHAP-selected tokens",
        &report.flips_shap,
    ));
    let _ = writeln!(out);
    out.push_str(&render_flip_text(
        "Flips when masking TF-IDF-selected tokens",
        &report.flips_tfidf,
    ));
    let _ = writeln!(out, "```");
    out
}
