//! Static SVG rendering of loss/accuracy training curves: two panels, train
//! and validation polylines each, axis labels and epoch ticks. Output is a
//! deterministic function of the history.

use std::path::Path;

use crate::error::{Error, Result};
use crate::optim::TrainingHistory;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 52.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 40.0;
const GAP: f64 = 64.0;

pub fn render_curves_svg(history: &TrainingHistory, path: impl AsRef<Path>) -> Result<()> {
    let svg = curves_svg(history)?;
    std::fs::write(path, svg)?;
    Ok(())
}

pub fn curves_svg(history: &TrainingHistory) -> Result<String> {
    if history.is_empty() {
        return Err(Error::invalid("cannot render curves for an empty history"));
    }
    let epochs: Vec<f64> = history.epochs.iter().map(|r| r.epoch as f64).collect();
    let train_loss: Vec<f64> = history.epochs.iter().map(|r| r.train_loss).collect();
    let val_loss: Vec<f64> = history.epochs.iter().map(|r| r.val_loss).collect();
    let train_acc: Vec<f64> = history.epochs.iter().map(|r| r.train_acc).collect();
    let val_acc: Vec<f64> = history.epochs.iter().map(|r| r.val_acc).collect();

    let loss_max = train_loss
        .iter()
        .chain(&val_loss)
        .fold(0.0f64, |a, &b| a.max(b))
        .max(1e-9);

    let width = MARGIN_L * 2.0 + PANEL_W * 2.0 + GAP;
    let height = MARGIN_T + PANEL_H + MARGIN_B;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let loss_x0 = MARGIN_L;
    let acc_x0 = MARGIN_L + PANEL_W + GAP;
    panel(
        &mut svg,
        loss_x0,
        "Loss",
        &epochs,
        &[
            ("train-loss", "#1f77b4", &train_loss),
            ("val-loss", "#d62728", &val_loss),
        ],
        0.0,
        loss_max * 1.05,
    );
    panel(
        &mut svg,
        acc_x0,
        "Accuracy",
        &epochs,
        &[
            ("train-acc", "#1f77b4", &train_acc),
            ("val-acc", "#d62728", &val_acc),
        ],
        0.0,
        1.0,
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn panel(
    svg: &mut String,
    x0: f64,
    title: &str,
    epochs: &[f64],
    series: &[(&str, &str, &Vec<f64>)],
    y_min: f64,
    y_max: f64,
) {
    let y0 = MARGIN_T;
    let x_min = epochs[0];
    let x_max = epochs[epochs.len() - 1].max(x_min + 1.0);
    let map_x = |e: f64| x0 + (e - x_min) / (x_max - x_min) * PANEL_W;
    // SVG y grows downward, so larger values map to smaller coordinates.
    let map_y = |v: f64| y0 + (y_max - v) / (y_max - y_min) * PANEL_H;

    svg.push_str(&format!(
        "<text x=\"{:.4}\" y=\"{:.4}\" text-anchor=\"middle\" font-weight=\"bold\">{title}</text>\n",
        x0 + PANEL_W / 2.0,
        y0 - 12.0
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{x0:.4}\" y1=\"{:.4}\" x2=\"{x0:.4}\" y2=\"{:.4}\" stroke=\"black\"/>\n",
        y0,
        y0 + PANEL_H
    ));
    svg.push_str(&format!(
        "<line x1=\"{x0:.4}\" y1=\"{:.4}\" x2=\"{:.4}\" y2=\"{:.4}\" stroke=\"black\"/>\n",
        y0 + PANEL_H,
        x0 + PANEL_W,
        y0 + PANEL_H
    ));

    // Epoch ticks: at most 10, integer steps.
    let step = ((epochs.len() as f64 / 10.0).ceil() as usize).max(1);
    for e in epochs.iter().step_by(step) {
        let x = map_x(*e);
        let yb = y0 + PANEL_H;
        svg.push_str(&format!(
            "<line x1=\"{x:.4}\" y1=\"{yb:.4}\" x2=\"{x:.4}\" y2=\"{:.4}\" stroke=\"black\"/>\n",
            yb + 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.4}\" y=\"{:.4}\" text-anchor=\"middle\">{}</text>\n",
            yb + 16.0,
            *e as u64
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.4}\" y=\"{:.4}\" text-anchor=\"middle\">epoch</text>\n",
        x0 + PANEL_W / 2.0,
        y0 + PANEL_H + 32.0
    ));

    // Value ticks: 5 divisions.
    for i in 0..=5 {
        let v = y_min + (y_max - y_min) * i as f64 / 5.0;
        let y = map_y(v);
        svg.push_str(&format!(
            "<line x1=\"{:.4}\" y1=\"{y:.4}\" x2=\"{x0:.4}\" y2=\"{y:.4}\" stroke=\"black\"/>\n",
            x0 - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.4}\" y=\"{:.4}\" text-anchor=\"end\">{v:.2}</text>\n",
            x0 - 8.0,
            y + 4.0
        ));
    }

    for (id, color, values) in series {
        let points: Vec<String> = epochs
            .iter()
            .zip(values.iter())
            .map(|(&e, &v)| format!("{:.4},{:.4}", map_x(e), map_y(v)))
            .collect();
        svg.push_str(&format!(
            "<polyline id=\"{id}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
    }
}
