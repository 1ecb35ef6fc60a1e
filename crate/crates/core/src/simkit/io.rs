use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{CurveId, OutageCurve, OutagePoint};

#[derive(serde::Serialize, serde::Deserialize)]
struct Row {
    protocol: String,
    snr_db: f64,
    rate_bits: f64,
    trials: u64,
    outages: u64,
    p_hat: f64,
    ci_lo: f64,
    ci_hi: f64,
}

const HEADER: [&str; 8] = ["protocol", "snr_db", "rate_bits", "trials", "outages", "p_hat", "ci_lo", "ci_hi"];

/// Writes one row per curve point, header first.
pub fn write_csv<W: Write>(curves: &[OutageCurve], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for c in curves {
        for p in &c.points {
            w.serialize(Row {
                protocol: c.curve.as_str().to_string(),
                snr_db: p.snr_db,
                rate_bits: p.rate_bits,
                trials: p.trials,
                outages: p.outages,
                p_hat: p.p_hat,
                ci_lo: p.ci_lo,
                ci_hi: p.ci_hi,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(curves: &[OutageCurve], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(curves, file).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    })
}

/// Parses rows back into curves. Consecutive rows with the same protocol
/// and increasing SNR form one curve.
pub fn read_csv_from<R: Read>(input: R, path: &Path) -> Result<Vec<OutageCurve>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(parse_err(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut curves: Vec<OutageCurve> = Vec::new();
    for (line, row) in r.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| parse_err(format!("row {}: {e}", line + 2)))?;
        let id: CurveId = row.protocol.parse().map_err(|e: Error| parse_err(e.to_string()))?;
        let point = OutagePoint {
            snr_db: row.snr_db,
            rate_bits: row.rate_bits,
            trials: row.trials,
            outages: row.outages,
            p_hat: row.p_hat,
            ci_lo: row.ci_lo,
            ci_hi: row.ci_hi,
        };
        match curves.last_mut() {
            Some(c) if c.curve == id && c.points.last().is_some_and(|p| p.snr_db < point.snr_db) => {
                c.points.push(point)
            }
            _ => curves.push(OutageCurve {
                curve: id,
                points: vec![point],
            }),
        }
    }
    Ok(curves)
}

pub fn read_csv(path: &Path) -> Result<Vec<OutageCurve>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv_from(file, path)
}

/// Gnuplot script drawing every curve on a log-scale outage axis, with the
/// data inlined. Zero estimates are left out since they have no logarithm.
pub fn gnuplot_script(curves: &[OutageCurve], image: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{image}'");
    let _ = writeln!(s, "set logscale y");
    let _ = writeln!(s, "set format y '10^{{%L}}'");
    let _ = writeln!(s, "set xlabel 'SNR (dB)'");
    let _ = writeln!(s, "set ylabel 'outage probability'");
    let _ = writeln!(s, "set key bottom left");
    let _ = writeln!(s, "set grid");
    let plotted: Vec<&OutageCurve> = curves.iter().filter(|c| c.points.iter().any(|p| p.p_hat > 0.0)).collect();
    if plotted.is_empty() {
        let _ = writeln!(s, "# no curve has a positive estimate");
        return s;
    }
    let items: Vec<String> = plotted
        .iter()
        .map(|c| {
            let style = if c.curve == CurveId::MaCutLowerBound { "lines dt 2" } else { "linespoints" };
            format!("'-' using 1:2 with {style} title '{}'", c.label())
        })
        .collect();
    let _ = writeln!(s, "plot {}", items.join(", \\\n     "));
    for c in plotted {
        for p in c.points.iter().filter(|p| p.p_hat > 0.0) {
            let _ = writeln!(s, "{} {}", p.snr_db, p.p_hat);
        }
        let _ = writeln!(s, "e");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ProtocolId;

    fn sample() -> Vec<OutageCurve> {
        let pt = |snr_db: f64, outages: u64| OutagePoint {
            snr_db,
            rate_bits: 1.0,
            trials: 1000,
            outages,
            p_hat: outages as f64 / 1000.0,
            ci_lo: 0.0,
            ci_hi: 0.1,
        };
        vec![
            OutageCurve {
                curve: CurveId::Protocol(ProtocolId::Fo),
                points: vec![pt(0.0, 300), pt(2.5, 17), pt(5.0, 0)],
            },
            OutageCurve {
                curve: CurveId::MaCutLowerBound,
                points: vec![pt(0.0, 3)],
            },
        ]
    }

    #[test]
    fn header_only_for_no_curves() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "protocol,snr_db,rate_bits,trials,outages,p_hat,ci_lo,ci_hi\n");
    }

    #[test]
    fn round_trip() {
        let curves = sample();
        let mut buf = Vec::new();
        write_csv(&curves, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(!text.contains('\r'));
        let back = read_csv_from(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, curves);
    }

    #[test]
    fn rejects_bad_header() {
        let err = read_csv_from("a,b\n1,2\n".as_bytes(), Path::new("x.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn script_skips_zeros() {
        let s = gnuplot_script(&sample(), "out.png");
        assert!(s.contains("set output 'out.png'"));
        assert!(s.contains("title 'fo R=1'"));
        assert!(!s.contains("\n5 0\n"));
        assert_eq!(s.matches("\ne\n").count(), 2);
    }
}
