//! Self-describing tabular text format for Green estimates: header lines,
//! then one row per nonzero cell (integer cell coordinates, value, standard
//! error).

use std::io::{BufRead, Write};

use super::{GreenError, GreenEstimate, GridSpec, PoleRefinement};

impl GreenEstimate {
    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "greenestimate v1")?;
        writeln!(w, "d {}", self.grid.dim)?;
        writeln!(w, "h {}", self.grid.h)?;
        match self.lambda {
            Some(l) => writeln!(w, "lambda {l}")?,
            None => writeln!(w, "lambda none")?,
        }
        writeln!(w, "n_paths {}", self.n_paths)?;
        writeln!(w, "seed {}", self.seed)?;
        writeln!(w, "origin {}", join(&self.grid.origin))?;
        writeln!(
            w,
            "shape {}",
            self.grid
                .shape
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )?;
        writeln!(w, "total_time {}", self.total_time)?;
        writeln!(w, "exterior_mass {}", self.exterior_mass)?;
        if let Some(pole) = &self.pole {
            writeln!(w, "pole_cell {}", pole.cell)?;
            writeln!(w, "pole_factor {}", pole.factor)?;
            writeln!(w, "pole_values {}", join(&pole.values))?;
        }
        writeln!(w, "cells")?;
        for (flat, &v) in self.values.iter().enumerate() {
            if v != 0.0 {
                let coords = self.grid.cell_coords(flat);
                let cs: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
                writeln!(w, "{} {} {}", cs.join(" "), fmt(v), fmt(self.stderr[flat]))?;
            }
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: &mut R) -> Result<GreenEstimate, GreenError> {
        let mut lines = r.lines().enumerate();
        let mut next = || -> Result<(usize, String), GreenError> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n + 1, l)),
                Some((n, Err(e))) => Err(GreenError::Parse {
                    line: n + 1,
                    message: e.to_string(),
                }),
                None => Err(GreenError::Parse {
                    line: 0,
                    message: "unexpected end of input".into(),
                }),
            }
        };
        let expect_kv = |pair: (usize, String), key: &str| -> Result<String, GreenError> {
            let (line, l) = pair;
            let mut parts = l.splitn(2, ' ');
            if parts.next() != Some(key) {
                return Err(GreenError::Parse {
                    line,
                    message: format!("expected `{key} …`, got {l:?}"),
                });
            }
            Ok(parts.next().unwrap_or("").trim().to_string())
        };
        let (hl, header) = next()?;
        if header.trim() != "greenestimate v1" {
            return Err(GreenError::Parse {
                line: hl,
                message: format!("bad header {header:?}"),
            });
        }
        let dim: usize = parse(expect_kv(next()?, "d")?, 2)?;
        let h: f64 = parse(expect_kv(next()?, "h")?, 3)?;
        let lam = expect_kv(next()?, "lambda")?;
        let lambda = if lam == "none" {
            None
        } else {
            Some(parse::<f64>(lam, 4)?)
        };
        let n_paths: u64 = parse(expect_kv(next()?, "n_paths")?, 5)?;
        let seed: u64 = parse(expect_kv(next()?, "seed")?, 6)?;
        let origin = parse_vec::<f64>(expect_kv(next()?, "origin")?, 7)?;
        let shape = parse_vec::<usize>(expect_kv(next()?, "shape")?, 8)?;
        if origin.len() != dim || shape.len() != dim {
            return Err(GreenError::Parse {
                line: 8,
                message: "origin/shape length does not match dimension".into(),
            });
        }
        let total_time: f64 = parse(expect_kv(next()?, "total_time")?, 9)?;
        let exterior_mass: f64 = parse(expect_kv(next()?, "exterior_mass")?, 10)?;
        let grid = GridSpec {
            dim,
            origin,
            h,
            shape,
        };
        let n_cells = grid.n_cells();
        let mut values = vec![0.0; n_cells];
        let mut stderr = vec![0.0; n_cells];
        let mut pole: Option<PoleRefinement> = None;

        let (mut line_no, mut line) = next()?;
        if let Some(cell_str) = line.strip_prefix("pole_cell ") {
            let cell: usize = parse(cell_str.trim().to_string(), line_no)?;
            let factor: usize = parse(expect_kv(next()?, "pole_factor")?, line_no + 1)?;
            let vals = parse_vec::<f64>(expect_kv(next()?, "pole_values")?, line_no + 2)?;
            if vals.len() != factor.pow(dim as u32) {
                return Err(GreenError::Parse {
                    line: line_no + 2,
                    message: "pole_values length mismatch".into(),
                });
            }
            pole = Some(PoleRefinement {
                cell,
                factor,
                values: vals,
            });
            let nx = next()?;
            line_no = nx.0;
            line = nx.1;
        }
        if line.trim() != "cells" {
            return Err(GreenError::Parse {
                line: line_no,
                message: format!("expected `cells`, got {line:?}"),
            });
        }
        loop {
            let (ln, l) = next()?;
            if l.trim() == "end" {
                break;
            }
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != dim + 2 {
                return Err(GreenError::Parse {
                    line: ln,
                    message: format!("expected {} columns, got {}", dim + 2, toks.len()),
                });
            }
            let mut coords = vec![0usize; dim];
            for (k, c) in coords.iter_mut().enumerate() {
                *c = toks[k].parse().map_err(|e| GreenError::Parse {
                    line: ln,
                    message: format!("bad coordinate: {e}"),
                })?;
                if *c >= grid.shape[k] {
                    return Err(GreenError::Parse {
                        line: ln,
                        message: format!("coordinate {c} out of range"),
                    });
                }
            }
            let flat = grid.flat_index(&coords);
            values[flat] = toks[dim].parse().map_err(|e| GreenError::Parse {
                line: ln,
                message: format!("bad value: {e}"),
            })?;
            stderr[flat] = toks[dim + 1].parse().map_err(|e| GreenError::Parse {
                line: ln,
                message: format!("bad stderr: {e}"),
            })?;
        }
        Ok(GreenEstimate {
            grid,
            values,
            stderr,
            lambda,
            n_paths,
            seed,
            total_time,
            exterior_mass,
            pole,
        })
    }
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

fn join(vs: &[f64]) -> String {
    vs.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(" ")
}

fn parse<T: std::str::FromStr>(s: String, line: usize) -> Result<T, GreenError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| GreenError::Parse {
        line,
        message: format!("{e}"),
    })
}

fn parse_vec<T: std::str::FromStr>(s: String, line: usize) -> Result<Vec<T>, GreenError>
where
    T::Err: std::fmt::Display,
{
    s.split_whitespace().map(|t| parse(t.to_string(), line)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_pole() {
        let grid = GridSpec::centered_box(2, 1.0, 0.25);
        let mut est = GreenEstimate::from_fn(grid, |x| if x[0] > 0.0 { 1.5 } else { 0.0 });
        est.lambda = Some(0.5);
        est.n_paths = 1234;
        est.seed = 99;
        est.pole = Some(PoleRefinement {
            cell: 3,
            factor: 4,
            values: (0..16).map(|i| i as f64 * 0.1).collect(),
        });
        let mut buf = Vec::new();
        est.write_text(&mut buf).unwrap();
        let back = GreenEstimate::read_text(&mut buf.as_slice()).unwrap();
        assert_eq!(back, est);
    }

    #[test]
    fn round_trip_domain_estimate() {
        let grid = GridSpec::centered_box(3, 0.5, 0.125);
        let est = GreenEstimate::from_fn(grid, |x| (x[0] + x[1] * x[2]).abs());
        let mut buf = Vec::new();
        est.write_text(&mut buf).unwrap();
        let back = GreenEstimate::read_text(&mut buf.as_slice()).unwrap();
        assert_eq!(back, est);
    }

    #[test]
    fn corrupt_input_is_rejected_with_line_numbers() {
        let text = "greenestimate v1\nd 2\nh 0.5\nlambda none\nn_paths 1\nseed 0\norigin -1 -1\nshape 4 4\ntotal_time 0\nexterior_mass 0\ncells\n9 9 1.0 0.0\nend\n";
        match GreenEstimate::read_text(&mut text.as_bytes()) {
            Err(GreenError::Parse { line, .. }) => assert_eq!(line, 12),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
