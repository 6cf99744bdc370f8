//! CSV feature matrix: a `#`-prefixed JSON header line, a column header line,
//! then one row per frame (`frame,start_time,` followed by the phases in bin
//! order). Values use Rust's shortest round-trip formatting, so a dump read
//! back reproduces the vectors bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{FeatureConfig, FeatureVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub fs: f64,
    pub n: usize,
    pub band: (f64, f64),
    pub fft_size: usize,
    pub dim: usize,
    pub first_bin: usize,
    pub fingerprint: String,
}

impl DumpHeader {
    pub fn new(config: &FeatureConfig, band_bins: (usize, usize)) -> Self {
        Self {
            fs: config.sample_rate,
            n: config.factor,
            band: (config.band.f_l(), config.band.f_h()),
            fft_size: config.fft_size,
            dim: band_bins.1 - band_bins.0 + 1,
            first_bin: band_bins.0,
            fingerprint: config.fingerprint(),
        }
    }
}

/// One parsed dump row.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRow {
    pub frame: u64,
    pub start_time: f64,
    pub phases: Vec<f64>,
}

pub fn write_feature_dump<W: Write>(
    mut out: W,
    header: &DumpHeader,
    rows: &[FeatureVector],
) -> Result<()> {
    let io = |e| Error::io("<feature dump>", e);
    writeln!(out, "# {}", serde_json::to_string(header)?).map_err(io)?;
    let mut line = String::from("frame,start_time");
    for k in header.first_bin..header.first_bin + header.dim {
        write!(line, ",bin{k}").unwrap();
    }
    writeln!(out, "{line}").map_err(io)?;
    for fv in rows {
        if fv.dim() != header.dim {
            return Err(Error::Shape {
                context: "feature dump row",
                expected: header.dim,
                actual: fv.dim(),
            });
        }
        line.clear();
        write!(line, "{},{}", fv.frame_meta.index, fv.frame_meta.start_time).unwrap();
        for p in &fv.phases {
            write!(line, ",{p}").unwrap();
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_feature_dump<R: BufRead>(input: R) -> Result<(DumpHeader, Vec<DumpRow>)> {
    let corrupt = |detail: String| Error::Corrupt {
        what: "feature dump",
        detail,
    };
    let mut lines = input.lines();
    let mut next = || -> Result<Option<String>> {
        lines
            .next()
            .transpose()
            .map_err(|e| Error::io("<feature dump>", e))
    };
    let first = next()?.ok_or_else(|| corrupt("empty input".into()))?;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| corrupt("missing header line".into()))?;
    let header: DumpHeader = serde_json::from_str(json)?;
    next()?.ok_or_else(|| corrupt("missing column line".into()))?;
    let mut rows = Vec::new();
    while let Some(line) = next()? {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut field = |name: &str| {
            fields
                .next()
                .ok_or_else(|| corrupt(format!("row {} lacks {name}", rows.len())))
        };
        let frame = field("frame")?
            .parse()
            .map_err(|e| corrupt(format!("frame index: {e}")))?;
        let start_time = field("start_time")?
            .parse()
            .map_err(|e| corrupt(format!("start time: {e}")))?;
        let phases = fields
            .map(|f| f.parse::<f64>().map_err(|e| corrupt(format!("phase: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if phases.len() != header.dim {
            return Err(Error::Shape {
                context: "feature dump row",
                expected: header.dim,
                actual: phases.len(),
            });
        }
        rows.push(DumpRow {
            frame,
            start_time,
            phases,
        });
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::FeatureExtractor;
    use crate::signal::generate_tone;

    #[test]
    fn round_trip_is_exact() {
        let ex = FeatureExtractor::new(FeatureConfig::default()).unwrap();
        let audio = generate_tone(20_010.0, 44_100.0, 1.0, 0.3).unwrap();
        let fvs = ex.extract_audio(&audio).unwrap();
        assert_eq!(fvs.len(), 4);
        let header = DumpHeader::new(ex.config(), ex.band_bins());
        let mut buf = Vec::new();
        write_feature_dump(&mut buf, &header, &fvs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("frame,start_time,bin688,"));
        let (h, rows) = read_feature_dump(buf.as_slice()).unwrap();
        assert_eq!(h, header);
        assert_eq!(h.dim, 148);
        for (row, fv) in rows.iter().zip(&fvs) {
            assert_eq!(row.frame, fv.frame_meta.index);
            assert_eq!(row.start_time, fv.frame_meta.start_time);
            assert_eq!(row.phases, fv.phases);
        }
    }

    #[test]
    fn malformed_dumps_rejected() {
        assert!(read_feature_dump(&b""[..]).is_err());
        assert!(read_feature_dump(&b"frame,start\n"[..]).is_err());
        let header = DumpHeader::new(&FeatureConfig::default(), (688, 689));
        let mut buf = Vec::new();
        write_feature_dump(&mut buf, &header, &[]).unwrap();
        buf.extend_from_slice(b"0,0,0.5\n");
        assert!(matches!(
            read_feature_dump(buf.as_slice()),
            Err(Error::Shape { expected: 2, actual: 1, .. })
        ));
    }
}
