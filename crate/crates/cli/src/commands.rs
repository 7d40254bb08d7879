use std::path::Path;

use serde_json::{json, Value};

use coupling_geometry::energy::{energy, NeighborhoodSystem};
use coupling_geometry::ensembles::{
    entropy_profile_with_budget, generate_ensemble, run_test, statistic_profile, DistributionSummary,
    EnsembleSpec, Statistic,
};
use coupling_geometry::geometry::{compute_geometry, GeometryParams};
use coupling_geometry::io::{
    format_dense, format_labeled_csv, load_geometry, load_matrix, load_values_csv, save_geometry, unix_now,
    LoadedGeometry, MatrixFormat,
};
use coupling_geometry::model::{margins_of, BinaryMatrix, BlockGrid, CouplingGeometry, MarginPair};
use coupling_geometry::nestedness::{
    grid_weights, least_nested_reference, n_plus_index, ncg_index, nodf_index, temperature_index,
};
use coupling_geometry::samplers::{count_matrices_with_budget, log10_biguint, SamplerKind};
use coupling_geometry::{Error, Result};

use crate::output::{emit, envelope, json_text, num, opt_num, out_dir, write_text};
use crate::{Cli, Command, EnsembleOpts, GlobalOpts, InputFormat, Neighborhood, OutputFormat, SamplerArg};

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Geometry {
            input,
            neighborhood,
            levels,
            iterations,
            anneal_steps,
        } => {
            let matrix = read_matrix(&input.matrix, input.input_format)?;
            let params = GeometryParams {
                max_iterations: *iterations,
                tree_levels: *levels,
                anneal_steps: *anneal_steps,
                seed: g.seed,
                neighborhood: nbhd(*neighborhood),
                ..GeometryParams::default()
            };
            geometry_cmd(g, &matrix, &params)
        }
        Command::Energy { input, neighborhood } => {
            let matrix = read_matrix(&input.matrix, input.input_format)?;
            let nb = nbhd(*neighborhood);
            let e = energy(&matrix, nb);
            let name = nb_name(nb);
            let doc = envelope(g, "energy", json!({ "energy": e, "neighborhood": name }));
            emit(g, &doc, &["energy", "neighborhood"], &[vec![e.to_string(), name.into()]]);
            Ok(())
        }
        Command::Count {
            matrix,
            input_format,
            rows,
            cols,
            budget,
        } => {
            let margins = match (matrix, rows, cols) {
                (Some(path), _, _) => margins_of(&read_matrix(path, *input_format)?),
                (None, Some(r), Some(c)) => MarginPair::new(r.clone(), c.clone()),
                _ => return Err(Error::Argument("give a matrix or both --rows and --cols".into())),
            };
            let count = count_matrices_with_budget(&margins, *budget)?;
            let log10 = if count == 0u32.into() { None } else { Some(log10_biguint(&count)) };
            match g.format {
                OutputFormat::Json => {
                    let doc = envelope(g, "count", json!({ "count": count.to_string(), "log10_count": log10 }));
                    print!("{}", json_text(&doc));
                }
                OutputFormat::Csv => {
                    emit(g, &Value::Null, &["count", "log10_count"], &[vec![count.to_string(), opt_num(log10)]])
                }
            }
            Ok(())
        }
        Command::Sample {
            matrix,
            input_format,
            geometry,
            grid,
            ensemble,
        } => {
            let (matrix, geom) = match (matrix, geometry) {
                (_, Some(path)) => {
                    let loaded = read_geometry(path)?;
                    (loaded.matrix, Some(loaded.geometry))
                }
                (Some(path), None) => (read_matrix(path, *input_format)?, None),
                _ => return Err(Error::Argument("give a matrix or --geometry".into())),
            };
            let grid = match &geom {
                Some(geo) => resolve_grid(grid, geo)?,
                None if is_whole(grid) => BlockGrid::whole(matrix.rows(), matrix.cols()),
                None => return Err(Error::Argument(format!("grid '{grid}' needs --geometry"))),
            };
            let spec = ensemble_spec(g, ensemble, Some(grid), ensemble.samples);
            sample_cmd(g, &matrix, &spec, input_format.map(matrix_format))
        }
        Command::Entropy { geometry, grids, budget } => {
            let loaded = read_geometry(geometry)?;
            let grids = resolve_grids(grids.as_deref(), &loaded.geometry)?;
            let entries = entropy_profile_with_budget(&loaded.matrix, &grids, *budget)?;
            let rows = entries
                .iter()
                .map(|e| vec![e.grid.clone(), opt_num(e.log10_size), e.count.clone().unwrap_or_default()])
                .collect::<Vec<_>>();
            let doc = envelope(g, "entropy", json!({ "entries": entries }));
            emit(g, &doc, &["grid", "log10_size", "count"], &rows);
            Ok(())
        }
        Command::Profile {
            geometry,
            statistic,
            grids,
            ensemble,
        } => {
            let loaded = read_geometry(geometry)?;
            let statistic: Statistic = statistic.parse()?;
            let grids = resolve_grids(grids.as_deref(), &loaded.geometry)?;
            let spec = ensemble_spec(g, ensemble, None, ensemble.samples);
            profile_cmd(g, &loaded, statistic, &grids, &spec)
        }
        Command::Test {
            geometry,
            statistic,
            null,
            alt,
            alt_samples,
            ensemble,
        } => {
            let loaded = read_geometry(geometry)?;
            let statistic: Statistic = statistic.parse()?;
            let geo = &loaded.geometry;
            let null_spec = ensemble_spec(g, ensemble, Some(resolve_grid(null, geo)?), ensemble.samples)
                .with_seed(coupling_geometry::rng::derive_seed(g.seed, 0));
            let alt_spec = ensemble_spec(
                g,
                ensemble,
                Some(resolve_grid(alt, geo)?),
                alt_samples.unwrap_or(ensemble.samples),
            )
            .with_seed(coupling_geometry::rng::derive_seed(g.seed, 1));
            let report = run_test(&loaded.matrix, geo, statistic, &null_spec, &alt_spec)?;
            let doc = envelope(
                g,
                "test",
                json!({ "null_grid": null, "alt_grid": alt, "report": report }),
            );
            let path = out_dir(g).join(format!("test_{}.json", statistic.name()));
            write_text(&path, &json_text(&doc))?;
            let dist = report.p_value_distribution.as_ref();
            let row = vec![
                report.statistic.clone(),
                report.efficient.to_string(),
                opt_num(report.p_value),
                opt_num(dist.map(|d| d.quantile(0.5))),
                opt_num(dist.map(|d| d.quantile(0.05))),
                opt_num(dist.map(|d| d.quantile(0.95))),
            ];
            emit(
                g,
                &doc,
                &["statistic", "efficient", "p_value", "p_median", "p_q05", "p_q95"],
                &[row],
            );
            Ok(())
        }
        Command::Indices { input, geometry } => {
            let matrix = read_matrix(&input.matrix, input.input_format)?;
            let geo = match geometry {
                Some(path) => {
                    let loaded = read_geometry(path)?;
                    if loaded.matrix.shape() != matrix.shape() {
                        return Err(Error::Argument("geometry was computed for a matrix of another shape".into()));
                    }
                    loaded.geometry
                }
                None => compute_geometry(&matrix, &GeometryParams::with_seed(g.seed))?,
            };
            indices_cmd(g, &matrix, &geo)
        }
        Command::Summary { values, name } => {
            let values = load_values_csv(values)?;
            let s = DistributionSummary::from_values(name, values)?;
            let doc = envelope(g, "summary", json!({ "summary": s }));
            let mut row = vec![s.values.len().to_string(), num(s.mean), num(s.std)];
            row.extend(s.quantiles.iter().map(|&(_, q)| num(q)));
            emit(
                g,
                &doc,
                &["n", "mean", "std", "q01", "q05", "q25", "q50", "q75", "q95", "q99"],
                &[row],
            );
            Ok(())
        }
    }
}

fn nbhd(n: Neighborhood) -> NeighborhoodSystem {
    match n {
        Neighborhood::N4 => NeighborhoodSystem::N4,
        Neighborhood::N8 => NeighborhoodSystem::N8,
    }
}

fn nb_name(n: NeighborhoodSystem) -> &'static str {
    match n {
        NeighborhoodSystem::N4 => "n4",
        NeighborhoodSystem::N8 => "n8",
    }
}

fn matrix_format(f: InputFormat) -> MatrixFormat {
    match f {
        InputFormat::Dense => MatrixFormat::DenseText,
        InputFormat::Csv => MatrixFormat::LabeledCsv,
    }
}

fn read_matrix(path: &Path, format: Option<InputFormat>) -> Result<BinaryMatrix> {
    load_matrix(path, format.map(matrix_format))
}

fn read_geometry(path: &Path) -> Result<LoadedGeometry> {
    let loaded = load_geometry(path)?;
    for w in &loaded.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(loaded)
}

fn is_whole(spec: &str) -> bool {
    matches!(spec.trim().to_ascii_lowercase().as_str(), "1x1" | "coarsest" | "whole")
}

/// `1x1`, `finest`, `L<r>-<c>` (tree levels), or the `IxJ` label of a grid
/// in the geometry's series.
fn resolve_grid(spec: &str, geo: &CouplingGeometry) -> Result<BlockGrid> {
    let s = spec.trim().to_ascii_lowercase();
    if is_whole(&s) {
        return Ok(geo.coarsest_grid());
    }
    if s == "finest" {
        return Ok(geo.finest_grid.clone());
    }
    if let Some(rest) = s.strip_prefix('l') {
        let bad = || Error::Argument(format!("bad grid '{spec}', expected L<row level>-<col level>"));
        let (r, c) = rest.split_once('-').ok_or_else(bad)?;
        let r: usize = r.parse().map_err(|_| bad())?;
        let c: usize = c.parse().map_err(|_| bad())?;
        return geo.grid_at_level(r, c);
    }
    geo.grid_series()
        .into_iter()
        .find(|grid| grid.label() == s)
        .ok_or_else(|| {
            Error::Argument(format!(
                "unknown grid '{spec}' (use 1x1, finest, L<r>-<c> or one of: {})",
                geo.grid_series().iter().map(BlockGrid::label).collect::<Vec<_>>().join(", ")
            ))
        })
}

fn resolve_grids(specs: Option<&[String]>, geo: &CouplingGeometry) -> Result<Vec<BlockGrid>> {
    match specs {
        None => Ok(geo.grid_series()),
        Some(list) => list.iter().map(|s| resolve_grid(s, geo)).collect(),
    }
}

fn ensemble_spec(g: &GlobalOpts, e: &EnsembleOpts, grid: Option<BlockGrid>, n: usize) -> EnsembleSpec {
    EnsembleSpec {
        grid,
        sampler: match e.sampler {
            SamplerArg::Exact => SamplerKind::BlockExact,
            SamplerArg::Checkerboard => SamplerKind::Checkerboard,
            SamplerArg::Curveball => SamplerKind::Curveball,
        },
        n_samples: n,
        seed: g.seed,
        burn_in: e.burn_in,
        thin: e.thin,
        state_budget: e.budget,
    }
}

fn geometry_cmd(g: &GlobalOpts, matrix: &BinaryMatrix, params: &GeometryParams) -> Result<()> {
    let geo = compute_geometry(matrix, params)?;
    let path = out_dir(g).join("geometry.json");
    let stamp = (!g.no_timestamp).then(unix_now);
    save_geometry(&geo, matrix, &path, stamp)?;
    let grid = geo.finest_grid.label();
    let doc = envelope(
        g,
        "geometry",
        json!({
            "energy": geo.energy,
            "initial_energy": geo.energy_trace[0],
            "grid": grid,
            "row_levels": geo.row_tree.num_levels(),
            "col_levels": geo.col_tree.num_levels(),
            "path": path.display().to_string(),
        }),
    );
    emit(
        g,
        &doc,
        &["energy", "initial_energy", "grid", "row_levels", "col_levels", "path"],
        &[vec![
            geo.energy.to_string(),
            geo.energy_trace[0].to_string(),
            grid,
            geo.row_tree.num_levels().to_string(),
            geo.col_tree.num_levels().to_string(),
            path.display().to_string(),
        ]],
    );
    Ok(())
}

fn sample_cmd(g: &GlobalOpts, matrix: &BinaryMatrix, spec: &EnsembleSpec, format: Option<MatrixFormat>) -> Result<()> {
    let labeled = format == Some(MatrixFormat::LabeledCsv);
    let width = spec.n_samples.to_string().len();
    let mut printed = Vec::new();
    for (k, member) in generate_ensemble(matrix, spec).enumerate() {
        let member = member?;
        if let Some(dir) = &g.out {
            let (ext, text) = if labeled {
                ("csv", format_labeled_csv(&member)?)
            } else {
                ("txt", format_dense(&member))
            };
            write_text(&dir.join(format!("sample_{k:0width$}.{ext}")), &text)?;
        } else {
            match g.format {
                OutputFormat::Json => printed.push(json!((0..member.rows())
                    .map(|i| member.row(i).iter().map(|c| char::from(b'0' + c)).collect::<String>())
                    .collect::<Vec<_>>())),
                OutputFormat::Csv => {
                    if k > 0 {
                        println!();
                    }
                    if labeled {
                        print!("{}", format_labeled_csv(&member)?);
                    } else {
                        print!("{}", format_dense(&member));
                    }
                }
            }
        }
    }
    if g.out.is_none() && g.format == OutputFormat::Json {
        let doc = envelope(
            g,
            "sample",
            json!({ "grid": spec.grid.as_ref().map(BlockGrid::label), "samples": printed }),
        );
        print!("{}", json_text(&doc));
    }
    Ok(())
}

fn profile_cmd(
    g: &GlobalOpts,
    loaded: &LoadedGeometry,
    statistic: Statistic,
    grids: &[BlockGrid],
    spec: &EnsembleSpec,
) -> Result<()> {
    let summaries = statistic_profile(&loaded.matrix, &loaded.geometry, grids, statistic, spec)?;
    let dir = out_dir(g);
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for (k, (grid, s)) in grids.iter().zip(&summaries).enumerate() {
        let name = format!("profile_{}_{k}_{}.csv", statistic.name(), grid.label());
        let path = dir.join(&name);
        coupling_geometry::io::save_values_csv(&s.values, &path)?;
        files.push(name);
        let mut row = vec![grid.label(), s.values.len().to_string(), num(s.mean), num(s.std)];
        row.extend(s.quantiles.iter().map(|&(_, q)| num(q)));
        rows.push(row);
    }
    let entries: Vec<Value> = grids
        .iter()
        .zip(&summaries)
        .zip(&files)
        .map(|((grid, s), f)| json!({ "grid": grid.label(), "values_file": f, "summary": s }))
        .collect();
    let doc = envelope(
        g,
        "profile",
        json!({ "statistic": statistic.name(), "spec": spec, "profile": entries }),
    );
    write_text(&dir.join(format!("profile_{}.json", statistic.name())), &json_text(&doc))?;
    emit(
        g,
        &doc,
        &["grid", "n", "mean", "std", "q01", "q05", "q25", "q50", "q75", "q95", "q99"],
        &rows,
    );
    Ok(())
}

fn indices_cmd(g: &GlobalOpts, matrix: &BinaryMatrix, geo: &CouplingGeometry) -> Result<()> {
    let n_plus = n_plus_index(matrix);
    let temperature = optional(temperature_index(matrix))?;
    let nodf = optional(nodf_index(matrix))?;
    let (rw, cw) = grid_weights(&geo.finest_grid);
    let ncg = ncg_index(&geo.lambda, &least_nested_reference(&geo.lambda)?, &rw, &cw)?;
    let doc = envelope(
        g,
        "indices",
        json!({ "n_plus": n_plus, "temperature": temperature, "nodf": nodf, "ncg": ncg, "grid": geo.finest_grid.label() }),
    );
    emit(
        g,
        &doc,
        &["n_plus", "temperature", "nodf", "ncg"],
        &[vec![n_plus.to_string(), opt_num(temperature), opt_num(nodf), num(ncg)]],
    );
    Ok(())
}

/// Undefined indices are reported as missing instead of failing the command.
fn optional(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Domain(msg)) => {
            eprintln!("note: {msg}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}
