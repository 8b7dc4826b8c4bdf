//! Plain CSV emission shared by every exporter: header row, comma separator,
//! LF line endings, 17 significant digits.

use std::io::{self, Write};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write, R: AsRef<[f64]>>(mut w: W, header: &[String], rows: impl IntoIterator<Item = R>) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.as_ref().iter().map(|&x| fmt_f64(x)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.718281828459045e-7, 1e300, 0.0] {
            let s = fmt_f64(x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["a".into(), "b".into()], [[1.0, 2.0]]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "a,b\n1.0000000000000000e0,2.0000000000000000e0\n"
        );
    }
}
