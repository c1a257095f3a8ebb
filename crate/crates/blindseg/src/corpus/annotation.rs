//! Phoneme annotations: whitespace-separated three-column text, one segment
//! per line (`start_sample end_sample label`), TIMIT-style. Segments must be
//! contiguous and non-overlapping.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::segmenter::BoundarySet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start_sample: usize,
    pub end_sample: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub segments: Vec<Segment>,
}

impl Annotation {
    /// Total annotated length in samples (end of the last segment).
    pub fn end_sample(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end_sample)
    }

    /// Gold boundaries: the internal segment junctions, in seconds.
    /// Utterance edges (start of the first segment, end of the last) are
    /// excluded unless `include_edges` is set.
    pub fn gold_boundaries(&self, sample_rate: u32, include_edges: bool) -> BoundarySet {
        let sr = f64::from(sample_rate);
        let mut times = Vec::new();
        if self.segments.is_empty() {
            return BoundarySet::empty();
        }
        if include_edges {
            times.push(self.segments[0].start_sample as f64 / sr);
        }
        for s in &self.segments[..self.segments.len() - 1] {
            times.push(s.end_sample as f64 / sr);
        }
        if include_edges {
            times.push(self.end_sample() as f64 / sr);
        }
        times.dedup();
        BoundarySet::from_times(times).expect("junction times are strictly increasing")
    }

    /// Render back to annotation text, one segment per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            out.push_str(&format!("{} {} {}\n", s.start_sample, s.end_sample, s.label));
        }
        out
    }
}

/// Parse an annotation file. Blank lines are skipped; any malformed or
/// non-contiguous line is an error carrying its line number.
pub fn parse_annotation(path: impl AsRef<Path>) -> Result<Annotation> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotation_text(&text, path)
}

pub(crate) fn parse_annotation_text(text: &str, path: &Path) -> Result<Annotation> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut segments: Vec<Segment> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (a, b, label) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(l)) => (a, b, l),
            _ => return Err(perr(lineno, format!("expected 3 columns, got '{raw}'"))),
        };
        if parts.next().is_some() {
            return Err(perr(lineno, format!("expected 3 columns, got '{raw}'")));
        }
        let start: usize = a
            .parse()
            .map_err(|_| perr(lineno, format!("bad start sample '{a}'")))?;
        let end: usize = b
            .parse()
            .map_err(|_| perr(lineno, format!("bad end sample '{b}'")))?;
        if end <= start {
            return Err(perr(lineno, format!("segment [{start}, {end}) is empty")));
        }
        if let Some(prev) = segments.last() {
            if start != prev.end_sample {
                return Err(perr(
                    lineno,
                    format!(
                        "segments must be contiguous: previous ends at {}, this starts at {}",
                        prev.end_sample, start
                    ),
                ));
            }
        }
        segments.push(Segment {
            start_sample: start,
            end_sample: end,
            label: label.to_string(),
        });
    }
    if segments.is_empty() {
        return Err(perr(1, "annotation has no segments".into()));
    }
    Ok(Annotation { segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn parse(text: &str) -> Result<Annotation> {
        parse_annotation_text(text, &PathBuf::from("test.phn"))
    }

    #[test]
    fn junction_rule_yields_interior_boundaries() {
        let ann = parse("0 1600 sil\n1600 4800 aa\n4800 8000 sil\n").unwrap();
        let gold = ann.gold_boundaries(16000, false);
        assert_eq!(gold.times(), &[0.1, 0.3]);
    }

    #[test]
    fn include_edges_adds_both_ends() {
        let ann = parse("0 1600 sil\n1600 4800 aa\n4800 8000 sil\n").unwrap();
        let gold = ann.gold_boundaries(16000, true);
        assert_eq!(gold.times(), &[0.0, 0.1, 0.3, 0.5]);
    }

    #[test]
    fn single_segment_has_no_gold_boundaries() {
        let ann = parse("0 8000 aa\n").unwrap();
        assert_eq!(ann.gold_boundaries(16000, false).len(), 0);
    }

    #[test]
    fn gap_between_segments_is_a_parse_error_with_line() {
        let err = parse("0 1600 sil\n1700 4800 aa\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn overlap_is_a_parse_error() {
        assert!(parse("0 1600 sil\n1500 4800 aa\n").is_err());
    }

    #[test]
    fn text_round_trips_modulo_whitespace() {
        let src = "0   1600  sil\n1600 4800 aa\n4800 8000 sil\n";
        let ann = parse(src).unwrap();
        let re = parse(&ann.to_text()).unwrap();
        assert_eq!(ann, re);
    }

    #[test]
    fn gold_boundaries_are_interior_and_increasing() {
        let ann = parse("0 100 a\n100 300 b\n300 450 c\n450 700 d\n").unwrap();
        let gold = ann.gold_boundaries(16000, false);
        let dur = 700.0 / 16000.0;
        let mut prev = 0.0;
        for &t in gold.times() {
            assert!(t > 0.0 && t < dur);
            assert!(t > prev);
            prev = t;
        }
    }
}
