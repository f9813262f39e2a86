//! Value parsers for composite flags.

use apn_core::eval::Metric;

/// `cx,cy,w,h,theta`. Only syntax is checked here; geometry is validated
/// when the box is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxArg {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

fn parse_list(s: &str, expected: usize, what: &str) -> Result<Vec<f64>, String> {
    let values: Vec<f64> = s
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{t}` is not a finite number"))
        })
        .collect::<Result<_, _>>()?;
    if values.len() != expected {
        return Err(format!(
            "{what} needs {expected} comma-separated values, got {}",
            values.len()
        ));
    }
    Ok(values)
}

pub fn box_arg(s: &str) -> Result<BoxArg, String> {
    let v = parse_list(s, 5, "box (cx,cy,w,h,theta)")?;
    Ok(BoxArg {
        cx: v[0],
        cy: v[1],
        w: v[2],
        h: v[3],
        theta: v[4],
    })
}

/// `h,w` grid size, both at least 1.
pub fn grid_size(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("size needs `h,w`, got `{s}`"));
    }
    let dim = |t: &str| {
        t.parse::<usize>()
            .ok()
            .filter(|&v| v >= 1)
            .ok_or_else(|| format!("`{t}` is not a positive integer"))
    };
    Ok((dim(parts[0])?, dim(parts[1])?))
}

/// One flag value holding several thresholds (clap would otherwise read a
/// `Vec` field as a repeatable flag).
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds(pub Vec<f64>);

/// Comma-separated IoU thresholds in `(0, 1]`, or `0.5:0.95` for the ten
/// thresholds `0.50, 0.55, …, 0.95`.
pub fn iou_list(s: &str) -> Result<Thresholds, String> {
    if s.trim() == "0.5:0.95" {
        return Ok(Thresholds(apn_core::eval::iou_range_50_95()));
    }
    let values: Vec<f64> = s
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0 && *v <= 1.0)
                .ok_or_else(|| format!("IoU threshold `{t}` must be a number in (0, 1]"))
        })
        .collect::<Result<_, _>>()?;
    Ok(Thresholds(values))
}

pub fn metric(s: &str) -> Result<Metric, String> {
    s.parse::<Metric>().map_err(|e| e.to_string())
}

pub fn positive_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v > 0.0)
        .ok_or_else(|| format!("`{s}` must be a positive finite number"))
}

pub fn non_negative_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v >= 0.0)
        .ok_or_else(|| format!("`{s}` must be a finite number >= 0"))
}
