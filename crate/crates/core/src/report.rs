//! Study-level aggregation: per-participant means, test–retest reliability
//! and method agreement, grouped by task and pooled.
//!
//! Sessions are analyzed independently (concurrently when allowed) and then
//! reduced on one thread in (participant, task) order, so every output file
//! is byte-identical for identical inputs.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Config, Pooling};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kinemetrics::{
    bland_altman, bland_altman_points, icc_pair, test_retest_reliability, AgreementResult,
    BlandAltmanResult,
};
use crate::model::{Method, Task};
use crate::pipeline::{run_session, SessionReport};

/// Method pairs compared in the agreement table, reference first.
pub const METHOD_PAIRS: [(Method, Method); 5] = [
    (Method::Omc, Method::Rmm),
    (Method::Omc, Method::Ptm),
    (Method::Fp, Method::Rmm),
    (Method::Fp, Method::Ptm),
    (Method::Fp, Method::Omc),
];

/// Subset of sessions a statistic is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    Bilateral,
    Unilateral,
    Pooled,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Bilateral, Group::Unilateral, Group::Pooled];

    pub fn label(self) -> &'static str {
        match self {
            Group::Bilateral => "BL",
            Group::Unilateral => "UL",
            Group::Pooled => "BL+UL",
        }
    }

    pub fn contains(self, task: Task) -> bool {
        match self {
            Group::Bilateral => task == Task::Bilateral,
            Group::Unilateral => task == Task::Unilateral,
            Group::Pooled => true,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    /// Mean and population SD; `None` for no values.
    pub fn population(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            sd: var.sqrt(),
            n: values.len(),
        })
    }
}

/// One participant's mean height per method over their valid repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRow {
    pub participant: String,
    pub task: Task,
    pub means: BTreeMap<Method, MeanSd>,
}

/// Mean ± population SD of the participant means, per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: Group,
    pub methods: BTreeMap<Method, MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityEntry {
    pub group: Group,
    pub method: Method,
    pub result: Option<AgreementResult>,
    /// Why the value could not be computed.
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementEntry {
    pub group: Group,
    pub reference: Method,
    pub other: Method,
    pub n: usize,
    pub icc: Option<AgreementResult>,
    pub bland_altman: Option<BlandAltmanResult>,
    pub negative_icc: bool,
    pub reason: Option<String>,
}

/// One Bland–Altman plot point with the lines it is drawn against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaPlotPoint {
    pub group: Group,
    pub reference: Method,
    pub other: Method,
    pub participant: String,
    pub task: Task,
    /// `None` when points are participant means.
    pub rep: Option<u32>,
    pub mean_cm: f64,
    pub diff_cm: f64,
    pub bias_cm: f64,
    pub loa_low_cm: f64,
    pub loa_high_cm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodCount {
    pub valid: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub tool_version: String,
    pub config: Config,
    /// Conventions a reader needs to interpret the numbers.
    pub conventions: Vec<String>,
    pub repetitions: usize,
    pub counts: BTreeMap<Method, MethodCount>,
    pub sessions: Vec<SessionReport>,
    pub table1: Vec<ParticipantRow>,
    pub table1_summary: Vec<SummaryRow>,
    pub table2: Vec<ReliabilityEntry>,
    pub table3: Vec<AgreementEntry>,
    pub ba_points: Vec<BaPlotPoint>,
}

const CONVENTIONS: [&str; 4] = [
    "heights in cm; differences are reference minus other",
    "Bland-Altman SD uses the n-1 denominator; limits are bias +/- 1.96 SD",
    "table 1 summary SD is the population SD of participant means",
    "ICC is two-way random, absolute agreement, single measurement; negative values are reported as computed",
];

/// A paired observation for one method pair.
struct Pair<'a> {
    participant: &'a str,
    task: Task,
    rep: Option<u32>,
    a: f64,
    b: f64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn paired<'a>(
    sessions: &'a [SessionReport],
    group: Group,
    a: Method,
    b: Method,
    pooling: Pooling,
) -> Vec<Pair<'a>> {
    let mut out = Vec::new();
    for s in sessions.iter().filter(|s| group.contains(s.task)) {
        let both: Vec<(u32, f64, f64)> = s
            .repetitions
            .iter()
            .filter_map(|t| {
                let rep = t.repetition.rep;
                Some((rep, s.height(rep, a)?, s.height(rep, b)?))
            })
            .collect();
        match pooling {
            Pooling::Repetitions => out.extend(both.iter().map(|&(rep, x, y)| Pair {
                participant: &s.participant,
                task: s.task,
                rep: Some(rep),
                a: x,
                b: y,
            })),
            Pooling::ParticipantMeans if !both.is_empty() => {
                let xs: Vec<f64> = both.iter().map(|p| p.1).collect();
                let ys: Vec<f64> = both.iter().map(|p| p.2).collect();
                out.push(Pair {
                    participant: &s.participant,
                    task: s.task,
                    rep: None,
                    a: mean(&xs),
                    b: mean(&ys),
                });
            }
            Pooling::ParticipantMeans => {}
        }
    }
    out
}

fn agreement(
    sessions: &[SessionReport],
    group: Group,
    a: Method,
    b: Method,
    pooling: Pooling,
) -> (AgreementEntry, Vec<BaPlotPoint>) {
    let pairs = paired(sessions, group, a, b, pooling);
    let xs: Vec<f64> = pairs.iter().map(|p| p.a).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.b).collect();
    let mut entry = AgreementEntry {
        group,
        reference: a,
        other: b,
        n: pairs.len(),
        icc: None,
        bland_altman: None,
        negative_icc: false,
        reason: None,
    };
    if pairs.len() < 2 {
        entry.reason = Some(format!(
            "not computable: {} paired measurements",
            pairs.len()
        ));
        return (entry, Vec::new());
    }
    match icc_pair(&xs, &ys) {
        Ok(r) => {
            entry.negative_icc = r.is_negative();
            entry.icc = Some(r.with_pair(a, b));
        }
        Err(e) => entry.reason = Some(format!("ICC not computable: {e}")),
    }
    let mut points = Vec::new();
    if let (Ok(ba), Ok(pts)) = (bland_altman(&xs, &ys), bland_altman_points(&xs, &ys)) {
        points = pairs
            .iter()
            .zip(pts)
            .map(|(p, pt)| BaPlotPoint {
                group,
                reference: a,
                other: b,
                participant: p.participant.to_string(),
                task: p.task,
                rep: p.rep,
                mean_cm: pt.mean_cm,
                diff_cm: pt.diff_cm,
                bias_cm: ba.bias_cm,
                loa_low_cm: ba.loa_low_cm,
                loa_high_cm: ba.loa_high_cm,
            })
            .collect();
        entry.bland_altman = Some(ba);
    }
    (entry, points)
}

fn reliability(sessions: &[SessionReport], group: Group, method: Method) -> ReliabilityEntry {
    let members: Vec<&SessionReport> = sessions.iter().filter(|s| group.contains(s.task)).collect();
    let k = members
        .iter()
        .map(|s| s.repetitions.len())
        .max()
        .unwrap_or(0);
    let rows: Vec<Vec<Option<f64>>> = members
        .iter()
        .map(|s| (1..=k as u32).map(|rep| s.height(rep, method)).collect())
        .collect();
    match test_retest_reliability(&rows) {
        Ok(r) => ReliabilityEntry {
            group,
            method,
            result: Some(r),
            reason: None,
        },
        Err(e) => ReliabilityEntry {
            group,
            method,
            result: None,
            reason: Some(format!("not computable: {e}")),
        },
    }
}

impl StudyReport {
    /// Aggregates analyzed sessions; input order does not matter.
    pub fn from_sessions(mut sessions: Vec<SessionReport>, cfg: &Config) -> Self {
        sessions.sort_by(|x, y| (&x.participant, x.task).cmp(&(&y.participant, y.task)));

        let mut counts: BTreeMap<Method, MethodCount> = Method::ALL
            .iter()
            .map(|&m| {
                (
                    m,
                    MethodCount {
                        valid: 0,
                        excluded: 0,
                    },
                )
            })
            .collect();
        for s in &sessions {
            for m in &s.measurements {
                counts
                    .get_mut(&m.method)
                    .expect("all methods present")
                    .valid += 1;
            }
            for x in &s.exclusions {
                counts
                    .get_mut(&x.method)
                    .expect("all methods present")
                    .excluded += 1;
            }
        }

        let table1: Vec<ParticipantRow> = sessions
            .iter()
            .map(|s| ParticipantRow {
                participant: s.participant.clone(),
                task: s.task,
                means: Method::ALL
                    .iter()
                    .filter_map(|&m| {
                        let hs: Vec<f64> = s
                            .measurements
                            .iter()
                            .filter(|x| x.method == m)
                            .map(|x| x.height_cm)
                            .collect();
                        MeanSd::population(&hs).map(|ms| (m, ms))
                    })
                    .collect(),
            })
            .collect();
        let table1_summary = Group::ALL
            .iter()
            .map(|&group| SummaryRow {
                group,
                methods: Method::ALL
                    .iter()
                    .filter_map(|&m| {
                        let means: Vec<f64> = table1
                            .iter()
                            .filter(|r| group.contains(r.task))
                            .filter_map(|r| r.means.get(&m).map(|x| x.mean))
                            .collect();
                        MeanSd::population(&means).map(|ms| (m, ms))
                    })
                    .collect(),
            })
            .collect();

        let table2 = Group::ALL
            .iter()
            .flat_map(|&g| Method::ALL.iter().map(move |&m| (g, m)))
            .map(|(g, m)| reliability(&sessions, g, m))
            .collect();

        let mut table3 = Vec::new();
        let mut ba_points = Vec::new();
        for group in Group::ALL {
            for (a, b) in METHOD_PAIRS {
                let (entry, pts) = agreement(&sessions, group, a, b, cfg.pooling);
                table3.push(entry);
                ba_points.extend(pts);
            }
        }

        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: *cfg,
            conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
            repetitions: sessions.iter().map(|s| s.repetitions.len()).sum(),
            counts,
            sessions,
            table1,
            table1_summary,
            table2,
            table3,
            ba_points,
        }
    }

    pub fn agreement(
        &self,
        group: Group,
        reference: Method,
        other: Method,
    ) -> Option<&AgreementEntry> {
        self.table3
            .iter()
            .find(|e| e.group == group && e.reference == reference && e.other == other)
    }

    pub fn reliability(&self, group: Group, method: Method) -> Option<&ReliabilityEntry> {
        self.table2
            .iter()
            .find(|e| e.group == group && e.method == method)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn table1_csv(&self) -> String {
        let mut out = String::from("participant,task");
        for m in Method::ALL {
            let _ = write!(out, ",{m}_mean_cm,{m}_n");
        }
        out.push('\n');
        for row in &self.table1 {
            let _ = write!(out, "{},{}", row.participant, row.task);
            for m in Method::ALL {
                match row.means.get(&m) {
                    Some(ms) => {
                        let _ = write!(out, ",{},{}", num(ms.mean), ms.n);
                    }
                    None => out.push_str(",,0"),
                }
            }
            out.push('\n');
        }
        for row in &self.table1_summary {
            let _ = write!(out, "mean+/-sd,{}", row.group);
            for m in Method::ALL {
                match row.methods.get(&m) {
                    Some(ms) => {
                        let _ = write!(out, ",{}+/-{},{}", num(ms.mean), num(ms.sd), ms.n);
                    }
                    None => out.push_str(",,0"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn table2_csv(&self) -> String {
        let mut out = String::from("group,method,trr,n,note\n");
        for e in &self.table2 {
            let (v, n) = e
                .result
                .as_ref()
                .map_or((String::new(), 0), |r| (num(r.icc), r.n));
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.group,
                e.method,
                v,
                n,
                field(e.reason.as_deref().unwrap_or(""))
            );
        }
        out
    }

    pub fn table3_csv(&self) -> String {
        let mut out =
            String::from("group,reference,other,n,icc,bias_cm,sd_cm,loa_low_cm,loa_high_cm,note\n");
        for e in &self.table3 {
            let icc = e.icc.as_ref().map_or(String::new(), |r| num(r.icc));
            let ba = e.bland_altman.as_ref().map_or(",,,".to_string(), |b| {
                format!(
                    "{},{},{},{}",
                    num(b.bias_cm),
                    num(b.sd_cm),
                    num(b.loa_low_cm),
                    num(b.loa_high_cm)
                )
            });
            let note = match (&e.reason, e.negative_icc) {
                (Some(r), _) => r.clone(),
                (None, true) => "negative ICC".to_string(),
                (None, false) => String::new(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.group,
                e.reference,
                e.other,
                e.n,
                icc,
                ba,
                field(&note)
            );
        }
        out
    }

    pub fn ba_points_csv(&self) -> String {
        let mut out =
            String::from("group,reference,other,participant,task,rep,mean_cm,diff_cm,bias_cm,loa_low_cm,loa_high_cm\n");
        for p in &self.ba_points {
            let rep = p.rep.map_or(String::new(), |r| r.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                p.group,
                p.reference,
                p.other,
                field(&p.participant),
                p.task,
                rep,
                num(p.mean_cm),
                num(p.diff_cm),
                num(p.bias_cm),
                num(p.loa_low_cm),
                num(p.loa_high_cm)
            );
        }
        out
    }

    /// Writes every study output into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let files = [
            ("report.json", self.to_json()),
            ("table1.csv", self.table1_csv()),
            ("table2.csv", self.table2_csv()),
            ("table3.csv", self.table3_csv()),
            ("ba_points.csv", self.ba_points_csv()),
            ("measurements.csv", measurements_csv(&self.sessions)),
            ("exclusions.csv", exclusions_csv(&self.sessions)),
            ("config.txt", self.config.to_kv_string()),
        ];
        write_files(dir, &files)
    }
}

/// Fixed six-decimal rendering so CSV bytes do not depend on float printing.
fn num(v: f64) -> String {
    format!("{v:.6}")
}

/// Quotes a CSV field when it holds a separator or quote.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn measurements_csv(sessions: &[SessionReport]) -> String {
    let mut out = String::from("participant,task,rep,method,height_cm\n");
    for s in sessions {
        let mut rows: Vec<_> = s.measurements.iter().collect();
        rows.sort_by_key(|m| (m.repetition.rep, m.method));
        for m in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                field(&s.participant),
                s.task,
                m.repetition.rep,
                m.method,
                num(m.height_cm)
            );
        }
    }
    out
}

pub fn exclusions_csv(sessions: &[SessionReport]) -> String {
    let mut out = String::from("participant,task,rep,method,reason\n");
    for s in sessions {
        let mut rows: Vec<_> = s.exclusions.iter().collect();
        rows.sort_by_key(|x| (x.repetition.rep, x.method));
        for x in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                field(&s.participant),
                s.task,
                x.repetition.rep,
                x.method,
                field(&x.reason)
            );
        }
    }
    out
}

/// Writes one session's report, measurements and exclusions into `dir`.
pub fn write_session(report: &SessionReport, cfg: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    let sessions = std::slice::from_ref(report);
    let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    let files = [
        ("report.json", json),
        ("measurements.csv", measurements_csv(sessions)),
        ("exclusions.csv", exclusions_csv(sessions)),
        ("config.txt", cfg.to_kv_string()),
    ];
    write_files(dir, &files)
}

fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    files
        .iter()
        .map(|(name, text)| {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

/// Analyzes every manifest and aggregates the sessions.
///
/// An unreadable manifest aborts the study; problems inside recordings
/// become exclusions in the affected session.
pub fn run_study(manifests: &[PathBuf], cfg: &Config, exec: Execution) -> Result<StudyReport> {
    if manifests.is_empty() {
        return Err(Error::Argument("a study needs at least one session".into()));
    }
    cfg.validate()?;
    let sessions = exec
        .map(manifests, |path| run_session(path, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport::from_sessions(sessions, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinemetrics::JumpMeasurement;
    use crate::model::{Modality, RepetitionId};
    use crate::pipeline::RepTiming;

    fn session(participant: &str, task: Task, heights: &[[f64; 4]]) -> SessionReport {
        let id = |rep| RepetitionId {
            participant: participant.into(),
            task,
            rep,
        };
        SessionReport {
            participant: participant.into(),
            task,
            repetitions: (1..=heights.len() as u32)
                .map(|rep| RepTiming {
                    repetition: id(rep),
                    apex_s: rep as f64,
                    reference: Modality::Omc,
                })
                .collect(),
            measurements: heights
                .iter()
                .enumerate()
                .flat_map(|(i, row)| {
                    Method::ALL
                        .iter()
                        .zip(row)
                        .map(move |(&m, &h)| JumpMeasurement::new(id(i as u32 + 1), m, h).unwrap())
                })
                .collect(),
            exclusions: Vec::new(),
            calibrations: Vec::new(),
            notes: Vec::new(),
        }
    }

    #[test]
    fn single_participant_has_no_reliability() {
        let s = session("P01", Task::Bilateral, &[[20.0, 21.0, 21.5, 20.5]; 3]);
        let r = StudyReport::from_sessions(vec![s], &Config::default());
        let trr = r.reliability(Group::Bilateral, Method::Fp).unwrap();
        assert!(trr.result.is_none() && trr.reason.is_some());
        // three repetitions still pair up for agreement
        assert_eq!(
            r.agreement(Group::Bilateral, Method::Fp, Method::Omc)
                .unwrap()
                .n,
            3
        );
        let ul = r
            .agreement(Group::Unilateral, Method::Fp, Method::Omc)
            .unwrap();
        assert!(ul.icc.is_none() && ul.reason.is_some());
    }

    #[test]
    fn pooling_changes_the_unit_of_analysis() {
        let a = session(
            "P01",
            Task::Bilateral,
            &[[20.0, 21.0, 22.0, 19.0], [21.0, 22.0, 21.0, 20.0]],
        );
        let b = session(
            "P02",
            Task::Unilateral,
            &[[10.0, 11.0, 12.0, 9.0], [12.0, 12.5, 13.0, 11.0]],
        );
        let mut cfg = Config::default();
        let reps = StudyReport::from_sessions(vec![b.clone(), a.clone()], &cfg);
        assert_eq!(reps.sessions[0].participant, "P01");
        assert_eq!(
            reps.agreement(Group::Pooled, Method::Omc, Method::Rmm)
                .unwrap()
                .n,
            4
        );
        cfg.pooling = Pooling::ParticipantMeans;
        let means = StudyReport::from_sessions(vec![a, b], &cfg);
        let e = means
            .agreement(Group::Pooled, Method::Omc, Method::Rmm)
            .unwrap();
        assert_eq!(e.n, 2);
        // bias over participant means is the difference of their grand means
        let ba = e.bland_altman.unwrap();
        assert!((ba.bias_cm - ((21.5 + 11.75) / 2.0 - (21.5 + 12.5) / 2.0)).abs() < 1e-12);
        assert!(means.ba_points.iter().all(|p| p.rep.is_none()));
    }

    #[test]
    fn summary_uses_population_sd() {
        let a = session("P01", Task::Bilateral, &[[20.0; 4]]);
        let b = session("P02", Task::Bilateral, &[[30.0; 4]]);
        let r = StudyReport::from_sessions(vec![a, b], &Config::default());
        let s = &r.table1_summary[0].methods[&Method::Fp];
        assert_eq!((s.mean, s.sd, s.n), (25.0, 5.0, 2));
        assert!(r
            .table1_csv()
            .contains("mean+/-sd,BL,25.000000+/-5.000000,2"));
    }

    #[test]
    fn csv_fields_with_commas_are_quoted() {
        assert_eq!(field("a,b"), "\"a,b\"");
        assert_eq!(field("say \"hi\""), "\"say \"\"hi\"\"\"");
        assert_eq!(field("x"), "x");
    }
}
