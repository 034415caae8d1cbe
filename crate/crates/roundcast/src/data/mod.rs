//! Everything between raw frame tables and model-ready batches: CSV
//! ingest, round splitting, truncation, padding, fold construction, class
//! statistics, and the canonical JSON-lines round cache.
//!
//! The on-disk schema is one CSV per sheet with the exact header
//! `Winner,Round_Progression,Player1_Damaged%,Player2_Damaged%`; a single
//! combined file is also accepted when it carries a leading `Sheet` column.

pub mod synth;

use std::fs;
use std::io::{BufRead, BufReader, Write as IoWrite};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Mask, Tensor};

pub use synth::synth_generate;

const HEADER: [&str; 4] = [
    "Winner",
    "Round_Progression",
    "Player1_Damaged%",
    "Player2_Damaged%",
];

/// One row of the frame table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub winner: u8,
    pub round_progression: f64,
    pub p1_damaged_pct: f64,
    pub p2_damaged_pct: f64,
}

/// One complete round: the classification unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub sheet_id: String,
    pub round_index: usize,
    /// (player 1 damaged %, player 2 damaged %) per timestep at 5 fps.
    pub features: Vec<(f64, f64)>,
    pub winner: u8,
}

/// A padded batch ready for a model forward pass.
#[derive(Debug, Clone)]
pub struct RoundBatch {
    /// `[B, T_max, 2]`; positions beyond a round's length hold `pad_value`.
    pub features: Tensor,
    /// `[B, T_max]`, true at real timesteps.
    pub mask: Mask,
    pub lengths: Vec<usize>,
    /// `[B]` of 0/1 labels.
    pub labels: Tensor,
    pub pad_value: f64,
}

/// One cross-validation fold at sheet granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub test_sheet_ids: Vec<String>,
    pub train_sheet_ids: Vec<String>,
}

/// Explicit fold window layout; reproduces published sliding-window splits.
#[derive(Debug, Clone, Copy)]
pub struct FoldScheme {
    pub block_size: usize,
    pub stride: usize,
    pub start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabelStats {
    pub count: usize,
    /// None when the round set is empty (fraction undefined).
    pub fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassDistribution {
    pub label0: LabelStats,
    pub label1: LabelStats,
}

fn parse_cell(raw: &str, column: &str, file: &str, line: u64) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| {
        Error::Parse(format!(
            "{file}:{line}: column {column}: cannot parse {raw:?} as a number"
        ))
    })
}

fn validate_percent(value: f64, column: &str, file: &str, line: u64) -> Result<f64> {
    if !value.is_finite() || !(0.0..=100.0).contains(&value) {
        return Err(Error::Data(format!(
            "{file}:{line}: column {column}: value {value} outside [0, 100]"
        )));
    }
    Ok(value)
}

fn parse_record(fields: &[&str], file: &str, line: u64) -> Result<FrameRecord> {
    let winner_raw = parse_cell(fields[0], HEADER[0], file, line)?;
    if winner_raw != 0.0 && winner_raw != 1.0 {
        return Err(Error::Label(format!(
            "{file}:{line}: winner must be 0 or 1, got {winner_raw}"
        )));
    }
    Ok(FrameRecord {
        winner: winner_raw as u8,
        round_progression: validate_percent(
            parse_cell(fields[1], HEADER[1], file, line)?,
            HEADER[1],
            file,
            line,
        )?,
        p1_damaged_pct: validate_percent(
            parse_cell(fields[2], HEADER[2], file, line)?,
            HEADER[2],
            file,
            line,
        )?,
        p2_damaged_pct: validate_percent(
            parse_cell(fields[3], HEADER[3], file, line)?,
            HEADER[3],
            file,
            line,
        )?,
    })
}

/// Parses one CSV file. With the 4-column header the whole file is one
/// sheet named by the file stem; a leading `Sheet` column groups rows by
/// its value, preserving first-appearance order.
pub fn parse_frames_file(path: &Path) -> Result<Vec<(String, Vec<FrameRecord>)>> {
    let file_label = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("{file_label}: cannot read header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let has_sheet_col = match headers.as_slice() {
        h if h == HEADER => false,
        [first, rest @ ..] if first == "Sheet" && rest == HEADER => true,
        _ => {
            return Err(Error::Schema(format!(
                "{file_label}: header must be {} (optionally preceded by Sheet), got {}",
                HEADER.join(","),
                headers.join(",")
            )))
        }
    };

    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".to_string());
    let mut sheets: Vec<(String, Vec<FrameRecord>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(format!("{file_label}: {e}")))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(0);
        let fields: Vec<&str> = record.iter().collect();
        let expected = if has_sheet_col { 5 } else { 4 };
        if fields.len() != expected {
            return Err(Error::Parse(format!(
                "{file_label}:{line}: expected {expected} fields, got {}",
                fields.len()
            )));
        }
        let (sheet_id, data_fields) = if has_sheet_col {
            (fields[0].trim().to_string(), &fields[1..])
        } else {
            (stem.clone(), &fields[..])
        };
        let rec = parse_record(data_fields, &file_label, line)?;
        match sheets.iter_mut().find(|(id, _)| *id == sheet_id) {
            Some((_, rows)) => rows.push(rec),
            None => sheets.push((sheet_id, vec![rec])),
        }
    }
    Ok(sheets)
}

/// Parses a directory of per-sheet CSV files, sheet id = file stem.
/// Files are visited in lexicographic name order for reproducibility.
pub fn parse_frames(dir: &Path) -> Result<Vec<(String, Vec<FrameRecord>)>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("csv"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        out.extend(parse_frames_file(&path)?);
    }
    Ok(out)
}

/// Loads frames from either a directory of per-sheet CSVs or a single file.
pub fn load_frames(path: &Path) -> Result<Vec<(String, Vec<FrameRecord>)>> {
    if path.is_dir() {
        parse_frames(path)
    } else {
        parse_frames_file(path)
    }
}

/// Splits one sheet's frame sequence into rounds. A new round begins at
/// any row whose progression is strictly lower than its predecessor's,
/// which covers clean 0.0 resets and imperfect ones alike.
pub fn split_rounds(sheet_id: &str, frames: &[FrameRecord]) -> Result<Vec<Round>> {
    let mut rounds = Vec::new();
    let mut current: Vec<&FrameRecord> = Vec::new();
    let mut prev_progression = f64::NEG_INFINITY;
    for frame in frames {
        if frame.round_progression < prev_progression && !current.is_empty() {
            rounds.push(finish_round(sheet_id, rounds.len(), &current)?);
            current.clear();
        }
        prev_progression = frame.round_progression;
        current.push(frame);
    }
    if !current.is_empty() {
        rounds.push(finish_round(sheet_id, rounds.len(), &current)?);
    }
    Ok(rounds)
}

fn finish_round(sheet_id: &str, round_index: usize, frames: &[&FrameRecord]) -> Result<Round> {
    let winner = frames[0].winner;
    if let Some(pos) = frames.iter().position(|f| f.winner != winner) {
        return Err(Error::Integrity(format!(
            "sheet {sheet_id} round {round_index}: winner changes at frame {pos}"
        )));
    }
    Ok(Round {
        sheet_id: sheet_id.to_string(),
        round_index,
        features: frames
            .iter()
            .map(|f| (f.p1_damaged_pct, f.p2_damaged_pct))
            .collect(),
        winner,
    })
}

/// Parses and splits a whole dataset in one call.
pub fn load_rounds_from_frames(path: &Path) -> Result<Vec<Round>> {
    let mut rounds = Vec::new();
    for (sheet_id, frames) in load_frames(path)? {
        rounds.extend(split_rounds(&sheet_id, &frames)?);
    }
    Ok(rounds)
}

/// Keeps the first ceil(p·T) timesteps of a round.
pub fn truncate_round(round: &Round, p: f64) -> Result<Round> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Parameter(format!(
            "truncation fraction must lie in (0, 1], got {p}"
        )));
    }
    let t = round.features.len();
    let keep = ((p * t as f64).ceil() as usize).clamp(1, t);
    Ok(Round {
        sheet_id: round.sheet_id.clone(),
        round_index: round.round_index,
        features: round.features[..keep].to_vec(),
        winner: round.winner,
    })
}

/// Pads a set of rounds to a common length. `pad_value` is 0 for the LSTM
/// and −1 for the transformer (−1 cannot occur in real features).
pub fn pad_batch(rounds: &[&Round], pad_value: f64) -> Result<RoundBatch> {
    if rounds.is_empty() {
        return Err(Error::Data("cannot pad an empty batch".to_string()));
    }
    if pad_value != 0.0 && pad_value != -1.0 {
        return Err(Error::Parameter(format!(
            "pad value must be 0 or -1, got {pad_value}"
        )));
    }
    let b = rounds.len();
    let t_max = rounds.iter().map(|r| r.features.len()).max().unwrap_or(0);
    if t_max == 0 {
        return Err(Error::Data("batch contains an empty round".to_string()));
    }
    let mut features = vec![pad_value; b * t_max * 2];
    let mut mask = vec![false; b * t_max];
    let mut lengths = Vec::with_capacity(b);
    let mut labels = Vec::with_capacity(b);
    for (bi, round) in rounds.iter().enumerate() {
        if round.features.is_empty() {
            return Err(Error::Data(format!(
                "sheet {} round {} is empty",
                round.sheet_id, round.round_index
            )));
        }
        for (ti, &(p1, p2)) in round.features.iter().enumerate() {
            features[(bi * t_max + ti) * 2] = p1;
            features[(bi * t_max + ti) * 2 + 1] = p2;
            mask[bi * t_max + ti] = true;
        }
        lengths.push(round.features.len());
        labels.push(round.winner as f64);
    }
    Ok(RoundBatch {
        features: Tensor::from_vec(vec![b, t_max, 2], features)?,
        mask: Mask::from_vec(vec![b, t_max], mask)?,
        lengths,
        labels: Tensor::from_vec(vec![b], labels)?,
        pad_value,
    })
}

/// Builds k folds whose test sets are contiguous sheet blocks.
///
/// With `scheme: None`, block_size = ceil(S/k) and stride = block_size,
/// with trailing offsets clamped so every block fits; the test blocks then
/// cover all sheets. An explicit scheme places block j at
/// `start + j*stride` and fails if any block runs past the end (such
/// schemes may deliberately leave sheets outside every test set).
pub fn make_folds(
    sheet_ids: &[String],
    k: usize,
    scheme: Option<FoldScheme>,
) -> Result<Vec<FoldSplit>> {
    let s = sheet_ids.len();
    if k == 0 {
        return Err(Error::Config("fold count must be positive".to_string()));
    }
    if s < k {
        return Err(Error::Data(format!(
            "need at least {k} sheets for {k} folds, got {s}"
        )));
    }
    for (i, id) in sheet_ids.iter().enumerate() {
        if sheet_ids[..i].contains(id) {
            return Err(Error::Data(format!("duplicate sheet id {id:?}")));
        }
    }

    let (block, stride, start, explicit) = match scheme {
        Some(sc) => {
            if sc.block_size == 0 {
                return Err(Error::Config("block size must be positive".to_string()));
            }
            (sc.block_size, sc.stride, sc.start, true)
        }
        None => {
            let block = s.div_ceil(k);
            (block, block, 0, false)
        }
    };

    let mut folds = Vec::with_capacity(k);
    for j in 0..k {
        let offset = if explicit {
            let off = start + j * stride;
            if off + block > s {
                return Err(Error::Config(format!(
                    "fold {j} test block [{off}, {}) exceeds {s} sheets",
                    off + block
                )));
            }
            off
        } else {
            (j * stride).min(s - block)
        };
        let test: Vec<String> = sheet_ids[offset..offset + block].to_vec();
        let train: Vec<String> = sheet_ids
            .iter()
            .filter(|id| !test.contains(id))
            .cloned()
            .collect();
        folds.push(FoldSplit {
            fold_index: j,
            test_sheet_ids: test,
            train_sheet_ids: train,
        });
    }
    Ok(folds)
}

/// Exact label counts and fractions; fractions are None on an empty set.
pub fn class_distribution(rounds: &[Round]) -> ClassDistribution {
    let count1 = rounds.iter().filter(|r| r.winner == 1).count();
    let count0 = rounds.len() - count1;
    let total = rounds.len();
    let frac = |c: usize| {
        if total == 0 {
            None
        } else {
            Some(c as f64 / total as f64)
        }
    };
    ClassDistribution {
        label0: LabelStats {
            count: count0,
            fraction: frac(count0),
        },
        label1: LabelStats {
            count: count1,
            fraction: frac(count1),
        },
    }
}

fn validate_round(round: &Round, context: &str) -> Result<()> {
    if round.features.is_empty() {
        return Err(Error::Data(format!("{context}: round has no timesteps")));
    }
    if round.winner > 1 {
        return Err(Error::Label(format!(
            "{context}: winner must be 0 or 1, got {}",
            round.winner
        )));
    }
    for &(p1, p2) in &round.features {
        for v in [p1, p2] {
            if !v.is_finite() || !(0.0..=100.0).contains(&v) {
                return Err(Error::Data(format!(
                    "{context}: feature value {v} outside [0, 100]"
                )));
            }
        }
    }
    Ok(())
}

/// Writes rounds as the canonical cache format: one JSON round per line.
pub fn save_rounds(path: &Path, rounds: &[Round]) -> Result<()> {
    let mut out = String::new();
    for round in rounds {
        out.push_str(&serde_json::to_string(round).map_err(|e| Error::Format(e.to_string()))?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads the canonical JSON-lines round format, validating invariants.
pub fn load_rounds(path: &Path) -> Result<Vec<Round>> {
    let file_label = path.display().to_string();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut rounds = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let round: Round = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{file_label}:{}: {e}", i + 1)))?;
        validate_round(&round, &format!("{file_label}:{}", i + 1))?;
        rounds.push(round);
    }
    Ok(rounds)
}

/// Writes one CSV per sheet in the ingest schema, reconstructing the
/// progression column as 100·t/(T−1) per round.
pub fn write_sheet_csvs(dir: &Path, rounds: &[Round]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut sheets: Vec<(&str, Vec<&Round>)> = Vec::new();
    for round in rounds {
        match sheets.iter_mut().find(|(id, _)| *id == round.sheet_id) {
            Some((_, list)) => list.push(round),
            None => sheets.push((&round.sheet_id, vec![round])),
        }
    }
    for (sheet_id, list) in &mut sheets {
        list.sort_by_key(|r| r.round_index);
        let mut file = fs::File::create(dir.join(format!("{sheet_id}.csv")))?;
        writeln!(file, "{}", HEADER.join(","))?;
        for round in list.iter() {
            let t = round.features.len();
            for (ti, &(p1, p2)) in round.features.iter().enumerate() {
                let progression = if t == 1 {
                    0.0
                } else {
                    100.0 * ti as f64 / (t - 1) as f64
                };
                writeln!(file, "{},{progression},{p1},{p2}", round.winner)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(w: u8, prog: f64, p1: f64, p2: f64) -> FrameRecord {
        FrameRecord {
            winner: w,
            round_progression: prog,
            p1_damaged_pct: p1,
            p2_damaged_pct: p2,
        }
    }

    fn round(sheet: &str, idx: usize, len: usize, winner: u8) -> Round {
        Round {
            sheet_id: sheet.to_string(),
            round_index: idx,
            features: (0..len).map(|i| (i as f64, (i * 2) as f64)).collect(),
            winner,
        }
    }

    #[test]
    fn split_rounds_on_progression_reset() {
        let frames: Vec<FrameRecord> = [0.0, 50.0, 100.0, 0.0, 60.0, 100.0]
            .iter()
            .map(|&p| frame(1, p, 10.0, 20.0))
            .collect();
        let rounds = split_rounds("s", &frames).unwrap();
        assert_eq!(rounds.len(), 2);
        assert_eq!(rounds[0].features.len(), 3);
        assert_eq!(rounds[1].features.len(), 3);
        assert_eq!(rounds[1].round_index, 1);
    }

    #[test]
    fn split_rounds_without_terminal_frame() {
        let frames: Vec<FrameRecord> = [0.0, 40.0, 90.0]
            .iter()
            .map(|&p| frame(0, p, 1.0, 2.0))
            .collect();
        let rounds = split_rounds("s", &frames).unwrap();
        assert_eq!(rounds.len(), 1);
        assert_eq!(rounds[0].features.len(), 3);
    }

    #[test]
    fn split_rounds_handles_imperfect_resets() {
        // The second round starts at 5.0, not 0.0; a strict decrease still
        // marks the boundary.
        let frames: Vec<FrameRecord> = [0.0, 50.0, 100.0, 5.0, 80.0]
            .iter()
            .map(|&p| frame(1, p, 0.0, 0.0))
            .collect();
        let rounds = split_rounds("s", &frames).unwrap();
        assert_eq!(rounds.len(), 2);
        assert_eq!(rounds[1].features.len(), 2);
    }

    #[test]
    fn split_rounds_rejects_mid_round_winner_change() {
        let frames = vec![frame(0, 0.0, 1.0, 2.0), frame(1, 50.0, 3.0, 4.0)];
        let err = split_rounds("sheet_x", &frames).unwrap_err();
        match err {
            Error::Integrity(msg) => assert!(msg.contains("sheet_x")),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn truncate_keeps_ceil_fraction() {
        let r = round("s", 0, 100, 1);
        assert_eq!(truncate_round(&r, 0.75).unwrap().features.len(), 75);
        let r1 = round("s", 0, 1, 1);
        assert_eq!(truncate_round(&r1, 0.25).unwrap().features.len(), 1);
        assert_eq!(truncate_round(&r, 1.0).unwrap(), r);
    }

    #[test]
    fn truncate_rejects_out_of_range_fraction() {
        let r = round("s", 0, 4, 0);
        assert!(truncate_round(&r, 0.0).is_err());
        assert!(truncate_round(&r, -0.5).is_err());
        assert!(truncate_round(&r, 1.5).is_err());
    }

    #[test]
    fn truncate_is_monotone_in_p() {
        let r = round("s", 0, 37, 1);
        let a = truncate_round(&r, 0.3).unwrap();
        let b = truncate_round(&r, 0.7).unwrap();
        assert!(a.features.len() <= b.features.len());
        assert_eq!(&b.features[..a.features.len()], &a.features[..]);
    }

    #[test]
    fn pad_batch_layout_and_mask() {
        let r3 = round("s", 0, 3, 0);
        let r5 = round("s", 1, 5, 1);
        let batch = pad_batch(&[&r3, &r5], -1.0).unwrap();
        assert_eq!(batch.features.shape(), &[2, 5, 2]);
        assert_eq!(batch.lengths, vec![3, 5]);
        assert_eq!(batch.labels.data(), &[0.0, 1.0]);
        for ti in 0..5 {
            assert_eq!(batch.mask.data()[ti], ti < 3);
            assert!(batch.mask.data()[5 + ti]);
        }
        for ti in 3..5 {
            assert_eq!(batch.features.data()[(ti) * 2], -1.0);
            assert_eq!(batch.features.data()[(ti) * 2 + 1], -1.0);
        }
    }

    #[test]
    fn pad_batch_single_round_is_unpadded() {
        let r = round("s", 0, 4, 1);
        let batch = pad_batch(&[&r], 0.0).unwrap();
        assert!(batch.mask.data().iter().all(|&m| m));
        assert_eq!(batch.features.shape(), &[1, 4, 2]);
    }

    #[test]
    fn pad_batch_rejects_empty_and_bad_pad() {
        assert!(matches!(pad_batch(&[], 0.0), Err(Error::Data(_))));
        let r = round("s", 0, 2, 0);
        assert!(matches!(
            pad_batch(&[&r], 0.5),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn default_folds_partition_ten_sheets() {
        let sheets: Vec<String> = (1..=10).map(|i| format!("sheet_{i:02}")).collect();
        let folds = make_folds(&sheets, 5, None).unwrap();
        assert_eq!(folds.len(), 5);
        let mut covered = Vec::new();
        for (j, fold) in folds.iter().enumerate() {
            assert_eq!(fold.test_sheet_ids.len(), 2);
            assert_eq!(fold.test_sheet_ids, &sheets[j * 2..j * 2 + 2]);
            for id in &fold.test_sheet_ids {
                assert!(!fold.train_sheet_ids.contains(id));
                covered.push(id.clone());
            }
            assert_eq!(
                fold.test_sheet_ids.len() + fold.train_sheet_ids.len(),
                sheets.len()
            );
        }
        covered.sort();
        covered.dedup();
        assert_eq!(covered.len(), 10);
    }

    #[test]
    fn explicit_scheme_reproduces_sliding_windows() {
        let sheets: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let folds = make_folds(
            &sheets,
            5,
            Some(FoldScheme {
                block_size: 4,
                stride: 1,
                start: 2,
            }),
        )
        .unwrap();
        for (j, fold) in folds.iter().enumerate() {
            assert_eq!(fold.test_sheet_ids, &sheets[2 + j..2 + j + 4]);
        }
    }

    #[test]
    fn explicit_scheme_out_of_range_is_config_error() {
        let sheets: Vec<String> = (0..6).map(|i| format!("s{i}")).collect();
        let err = make_folds(
            &sheets,
            5,
            Some(FoldScheme {
                block_size: 4,
                stride: 1,
                start: 2,
            }),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn folds_reject_too_few_sheets() {
        let sheets: Vec<String> = (0..3).map(|i| format!("s{i}")).collect();
        assert!(matches!(make_folds(&sheets, 5, None), Err(Error::Data(_))));
    }

    #[test]
    fn class_distribution_counts_and_fractions() {
        let rounds = vec![
            round("s", 0, 2, 0),
            round("s", 1, 2, 0),
            round("s", 2, 2, 1),
            round("s", 3, 2, 1),
        ];
        let dist = class_distribution(&rounds);
        assert_eq!(dist.label0.count, 2);
        assert_eq!(dist.label1.count, 2);
        assert_eq!(dist.label0.fraction, Some(0.5));
        assert_eq!(dist.label1.fraction, Some(0.5));

        let empty = class_distribution(&[]);
        assert_eq!(empty.label0.count, 0);
        assert_eq!(empty.label0.fraction, None);
    }

    #[test]
    fn jsonl_round_trip_preserves_rounds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rounds.jsonl");
        let rounds = vec![round("alpha", 0, 5, 1), round("beta", 0, 3, 0)];
        save_rounds(&path, &rounds).unwrap();
        let loaded = load_rounds(&path).unwrap();
        assert_eq!(loaded, rounds);
    }

    #[test]
    fn csv_round_trip_recovers_round_boundaries() {
        let dir = tempfile::tempdir().unwrap();
        let rounds = vec![
            round("gamma", 0, 4, 1),
            round("gamma", 1, 6, 0),
            round("delta", 0, 3, 1),
        ];
        write_sheet_csvs(dir.path(), &rounds).unwrap();
        let mut recovered = load_rounds_from_frames(dir.path()).unwrap();
        recovered.sort_by(|a, b| (&a.sheet_id, a.round_index).cmp(&(&b.sheet_id, b.round_index)));
        let mut expected = rounds.clone();
        expected.sort_by(|a, b| (&a.sheet_id, a.round_index).cmp(&(&b.sheet_id, b.round_index)));
        assert_eq!(recovered, expected);
    }

    #[test]
    fn parse_rejects_bad_header_and_bad_cells() {
        let dir = tempfile::tempdir().unwrap();
        let bad_header = dir.path().join("bad.csv");
        fs::write(&bad_header, "Round_Progression,Player1_Damaged%\n1,2\n").unwrap();
        assert!(matches!(
            parse_frames_file(&bad_header),
            Err(Error::Schema(_))
        ));

        let bad_cell = dir.path().join("cell.csv");
        fs::write(
            &bad_cell,
            "Winner,Round_Progression,Player1_Damaged%,Player2_Damaged%\n1,abc,3,4\n",
        )
        .unwrap();
        match parse_frames_file(&bad_cell) {
            Err(Error::Parse(msg)) => {
                assert!(msg.contains("cell.csv") && msg.contains(":2"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_accepts_empty_file_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        fs::write(
            &path,
            "Winner,Round_Progression,Player1_Damaged%,Player2_Damaged%\n",
        )
        .unwrap();
        let sheets = parse_frames_file(&path).unwrap();
        assert!(sheets.is_empty());
    }

    #[test]
    fn single_file_mode_groups_by_sheet_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("all.csv");
        fs::write(
            &path,
            "Sheet,Winner,Round_Progression,Player1_Damaged%,Player2_Damaged%\n\
             a,1,0,1,2\na,1,50,3,4\nb,0,0,5,6\na,1,100,7,8\n",
        )
        .unwrap();
        let sheets = parse_frames_file(&path).unwrap();
        assert_eq!(sheets.len(), 2);
        assert_eq!(sheets[0].0, "a");
        assert_eq!(sheets[0].1.len(), 3);
        assert_eq!(sheets[1].0, "b");
        assert_eq!(sheets[1].1.len(), 1);
    }

    #[test]
    fn parse_rejects_out_of_range_percent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("range.csv");
        fs::write(
            &path,
            "Winner,Round_Progression,Player1_Damaged%,Player2_Damaged%\n1,0,150,4\n",
        )
        .unwrap();
        assert!(matches!(parse_frames_file(&path), Err(Error::Data(_))));
    }

    #[test]
    fn parse_rejects_invalid_winner_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("label.csv");
        fs::write(
            &path,
            "Winner,Round_Progression,Player1_Damaged%,Player2_Damaged%\n2,0,1,4\n",
        )
        .unwrap();
        assert!(matches!(parse_frames_file(&path), Err(Error::Label(_))));
    }
}
