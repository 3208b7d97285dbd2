use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use revind::ensemble::{run_ensemble, EnsembleSpec, PerturbationMode, Region};
use revind::indicators::{self, Checkpoints, DeviationVectors, NormSpec};
use revind::output::{self, format_value, SeriesTable};
use revind::scan::{self, Axis, GridSpec, IndicatorSpec, ScanOptions};
use revind::{MapFamily, MapInstance, Precision, State};

use crate::args::*;
use crate::CliError;

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_flag<T: FromStr>(flag: &str, s: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| usage(format!("--{flag} '{s}': {e}")))
}

fn key_value(flag: &str, s: &str) -> Result<(String, f64), CliError> {
    let (k, v) = s.split_once('=').ok_or_else(|| usage(format!("--{flag} '{s}': expected key=value")))?;
    Ok((k.trim().to_string(), parse_flag(flag, v.trim())?))
}

fn build_map(a: &MapArgs) -> Result<MapInstance, CliError> {
    let family: MapFamily = parse_flag("map", &a.map)?;
    let params = a.params.iter().map(|p| key_value("param", p)).collect::<Result<Vec<_>, _>>()?;
    Ok(MapInstance::from_params(family.name(), &params)?)
}

fn parse_checkpoints(s: &str) -> Result<Checkpoints, CliError> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("all") {
        return Ok(Checkpoints::All);
    }
    if let Some(k) = s.strip_prefix("log:") {
        return Ok(Checkpoints::LogSpaced { per_decade: parse_flag("checkpoints", k)? });
    }
    let pts = s.split(',').map(|t| parse_flag("checkpoints", t.trim())).collect::<Result<Vec<u64>, _>>()?;
    Ok(Checkpoints::Explicit(pts))
}

fn parse_window(s: &str) -> Result<(u64, u64), CliError> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| usage(format!("--fit-window '{s}': expected lo:hi")))?;
    Ok((parse_flag("fit-window", lo.trim())?, parse_flag("fit-window", hi.trim())?))
}

fn map_line(map: &MapInstance) -> String {
    let p: Vec<String> = map.params().iter().map(|(k, v)| format!("{k}={v:?}")).collect();
    if p.is_empty() {
        map.family().to_string()
    } else {
        format!("{} {}", map.family(), p.join(","))
    }
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn header(map: &MapInstance, extra: Vec<(&str, String)>) -> Vec<(String, String)> {
    let mut h = vec![("revind".to_string(), VERSION.to_string()), ("command".into(), command_line())];
    h.push(("map".into(), map_line(map)));
    h.extend(extra.into_iter().map(|(k, v)| (k.to_string(), v)));
    h
}

fn x0_line(x0: &[f64]) -> String {
    x0.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::OrbitError(a) => orbit_error(a),
        Command::Variational(a) => variational(a),
        Command::Ensemble(a) => ensemble(a),
        Command::Scan(a) => scan(a),
        Command::Section(a) => section(a),
    }
}

fn orbit_error(a: OrbitErrorArgs) -> Result<(), CliError> {
    let map = build_map(&a.map)?;
    let x0 = State::new(a.x0.clone());
    let precision: Precision = parse_flag("spec", &a.spec)?;
    let norm: NormSpec = parse_flag("norm", &a.norm)?;
    let ck = parse_checkpoints(&a.checkpoints)?;
    let mut meta = vec![("x0", x0_line(&a.x0)), ("n", a.n.to_string()), ("spec", precision.to_string())];
    let (name, series, extra, footer) = match a.indicator {
        ErrorIndicator::Rev => {
            meta.push(("norm", norm.to_string()));
            ("R", indicators::reversibility_error(&map, &x0, a.n, precision, norm, &ck)?, None, vec![])
        }
        ErrorIndicator::Div => {
            let reference: Precision = parse_flag("ref-spec", &a.ref_spec)?;
            meta.push(("ref-spec", reference.to_string()));
            meta.push(("norm", norm.to_string()));
            ("Delta", indicators::orbit_divergence(&map, &x0, a.n, precision, reference, norm, &ck)?, None, vec![])
        }
        ErrorIndicator::Global => {
            let g = indicators::global_error_translation(&map, &x0, a.n, precision, &ck)?;
            let footer = vec![format!("drift G_N/N: {}", format_value(g.drift))];
            ("G", g.series, Some(("w", g.fluctuation)), footer)
        }
    };
    meta.insert(2, ("indicator", name.to_string()));
    let ln: Vec<f64> = series.values.iter().map(|v| v.abs().ln()).collect();
    let ln_name = format!("ln_{name}");
    let mut names = vec![name, ln_name.as_str()];
    let mut columns = vec![series.values.as_slice(), ln.as_slice()];
    if let Some((n, w)) = &extra {
        names.push(n);
        columns.push(w);
    }
    let table = SeriesTable { header: header(&map, meta), names, iterations: &series.iterations, columns, footer };
    output::write_series_csv(&table, &a.out)?;
    if let Some(v) = series.last() {
        println!("{name}({}) = {}", a.n, format_value(v));
    }
    Ok(())
}

fn variational(a: VariationalArgs) -> Result<(), CliError> {
    let map = build_map(&a.map)?;
    let x0 = State::new(a.x0.clone());
    let vectors = a.vector_seed.map_or(DeviationVectors::Default, |seed| DeviationVectors::Random { seed });
    let (v, u) = vectors.resolve(map.state_dim())?;
    let seed = a.vector_seed.map_or("none".to_string(), |s| s.to_string());
    let meta = vec![("x0", x0_line(&a.x0)), ("n", a.n.to_string()), ("vector-seed", seed)];
    let (names, series): (Vec<&str>, Vec<indicators::IndicatorSeries>) = match a.indicator {
        VariationalIndicator::Mlce => (vec!["mlce"], vec![indicators::mlce(&map, &x0, &v, a.n)?]),
        VariationalIndicator::Megno => {
            let (y, ybar) = indicators::megno(&map, &x0, &v, u.as_deref(), a.n, 1, -1)?;
            (vec!["Y", "Ybar"], vec![y, ybar])
        }
        VariationalIndicator::Sali => {
            let u = u.ok_or_else(|| {
                CliError::Core(revind::Error::InvalidInput("SALI needs a map of dimension 2 or more".into()))
            })?;
            (vec!["sali"], vec![indicators::sali(&map, &x0, &v, &u, a.n)?])
        }
    };
    let mut meta = meta;
    meta.insert(0, ("indicator", names.join(",")));
    let table = SeriesTable {
        header: header(&map, meta),
        names: names.clone(),
        iterations: &series[0].iterations,
        columns: series.iter().map(|s| s.values.as_slice()).collect(),
        footer: vec![],
    };
    output::write_series_csv(&table, &a.out)?;
    for (n, s) in names.iter().zip(&series) {
        println!("{n}({}) = {}", a.n, format_value(s.last().unwrap()));
    }
    Ok(())
}

fn ensemble(a: EnsembleArgs) -> Result<(), CliError> {
    let map = build_map(&a.map)?;
    let region: Region = parse_flag("region", &a.region)?;
    let spec = a.spec.as_deref().map(|s| parse_flag::<Precision>("spec", s)).transpose()?;
    let mode = match a.mode {
        Mode::Roundoff => PerturbationMode::roundoff(spec.unwrap_or(Precision::SINGLE)),
        Mode::Noise => {
            let amplitude = a.amplitude.ok_or_else(|| usage("--mode noise needs --amplitude"))?;
            PerturbationMode::Noise { amplitude, precision: spec.unwrap_or(Precision::DOUBLE) }
        }
    };
    let window = a.fit_window.as_deref().map(parse_window).transpose()?;
    let ck = parse_checkpoints(&a.checkpoints)?;
    let ens = EnsembleSpec::new(region, a.count, a.seed)?;
    let vs = run_ensemble(&map, &ens, mode, a.n, &ck, a.workers)?;

    let mut footer = Vec::new();
    for (c, name) in vs.coordinates.iter().enumerate() {
        let fit = match window {
            Some((lo, hi)) => vs.fit(c, lo, hi),
            None => vs.fit_last_decade(c),
        };
        let line = match fit {
            Ok(f) => format!(
                "fit sigma2_{name}: exponent {:.6} r2 {:.6} over n in [{}, {}]",
                f.exponent, f.r_squared, f.n_lo, f.n_hi
            ),
            Err(e) => format!("fit sigma2_{name}: unavailable ({e})"),
        };
        println!("{line}");
        footer.push(line);
    }
    let names: Vec<String> = vs.coordinates.iter().map(|c| format!("sigma2_{c}")).collect();
    let meta = vec![
        ("region", a.region.clone()),
        ("count", a.count.to_string()),
        ("mode", mode.to_string()),
        ("seed", a.seed.to_string()),
        ("n", a.n.to_string()),
    ];
    let table = SeriesTable {
        header: header(&map, meta),
        names: names.iter().map(String::as_str).collect(),
        iterations: &vs.iterations,
        columns: vs.variance.iter().map(Vec::as_slice).collect(),
        footer,
    };
    output::write_series_csv(&table, &a.out)?;
    Ok(())
}

fn scan(a: ScanArgs) -> Result<(), CliError> {
    let map = build_map(&a.map)?;
    let axes = a.grid.split(',').map(|t| parse_flag::<Axis>("grid", t.trim())).collect::<Result<Vec<_>, _>>()?;
    let [x_axis, y_axis]: [Axis; 2] =
        axes.try_into().map_err(|_| usage(format!("--grid '{}': expected exactly two axes", a.grid)))?;
    let fixed = a.fixed.iter().map(|f| key_value("fixed", f)).collect::<Result<Vec<_>, _>>()?;
    let precision = || parse_flag::<Precision>("spec", &a.spec);
    let norm = || parse_flag::<NormSpec>("norm", &a.norm);
    let vectors = a.vector_seed.map_or(DeviationVectors::Default, |seed| DeviationVectors::Random { seed });
    let indicator = match a.indicator {
        ScanIndicator::Rev => IndicatorSpec::Reversibility { precision: precision()?, norm: norm()? },
        ScanIndicator::Div => IndicatorSpec::Divergence {
            precision: precision()?,
            reference: parse_flag("ref-spec", &a.ref_spec)?,
            norm: norm()?,
        },
        ScanIndicator::Global => IndicatorSpec::Global { precision: precision()? },
        ScanIndicator::Mlce => IndicatorSpec::Mlce { vectors },
        ScanIndicator::Megno => IndicatorSpec::Megno { vectors },
        ScanIndicator::Sali => IndicatorSpec::Sali { vectors },
    };
    let grid = GridSpec { x_axis, y_axis, fixed, iterations: a.n, indicator };
    let mut opts = ScanOptions { workers: a.workers, ..ScanOptions::default() };
    if let Some(m) = a.max_cells {
        opts.max_cells = m;
    }
    let result = scan::grid_scan(&map, &grid, &opts)?;
    let paths = output::write_outputs(&result, &a.out)?;
    println!(
        "{}x{} {} scan in {:.2} s: {}, {}, {}",
        result.rows,
        result.cols,
        grid.indicator.name(),
        result.metadata.wall_time_seconds,
        paths.csv.display(),
        paths.pgm.display(),
        paths.json.display()
    );
    Ok(())
}

fn write_section(profile: &scan::SectionProfile, source: &Path, out: &Path) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", out.display()));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut w = std::io::BufWriter::new(fs::File::create(out).map_err(io)?);
    writeln!(w, "# revind: {VERSION}").map_err(io)?;
    writeln!(w, "# command: {}", command_line()).map_err(io)?;
    writeln!(w, "# source: {}", source.display()).map_err(io)?;
    writeln!(w, "# fixed: {}={}", profile.fixed_coordinate, format_value(profile.fixed_value)).map_err(io)?;
    writeln!(w, "{},value", profile.coordinate).map_err(io)?;
    for (c, v) in &profile.points {
        writeln!(w, "{},{}", format_value(*c), format_value(*v)).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn section(a: SectionArgs) -> Result<(), CliError> {
    let result = output::read_csv(&a.input)?;
    let profile = scan::extract_section(&result, &a.axis, a.value)?;
    write_section(&profile, &a.input, &a.out)?;
    println!("{} points at {} = {}", profile.points.len(), profile.fixed_coordinate, format_value(profile.fixed_value));
    Ok(())
}
