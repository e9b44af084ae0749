use anyhow::{Context, Result};
use serde_json::json;

use medkit::io::{write_color, write_labels, write_landmarks, write_volume};
use medkit::phantom::{gen_brain_suite, gen_lesion_dataset, gen_lung_slice, gen_registration_pair};
use medkit::LabelVolume;

use super::Ctx;
use crate::config::{PhantomRun, RunConfig};
use crate::report::{fmt, write_text, Report, Table};

/// Writes every requested phantom plus ready-to-run configs that point at the
/// generated files.
pub fn cmd_phantom(ctx: &Ctx, run: &PhantomRun) -> Result<Report> {
    let cfg = RunConfig::Phantom(run.clone());
    let mut report = Report::new("Synthetic phantoms", "phantom", run.seed, &cfg)?;
    let dir = &ctx.out_dir;
    let mut files = Table::new("manifest", "Generated data", &["dataset", "case", "file", "detail"]);

    if let Some(b) = &run.brain {
        let suite = gen_brain_suite(b)?;
        let mut cases = Vec::new();
        for (i, p) in suite.iter().enumerate() {
            let id = format!("case{:02}", i + 1);
            let base = format!("brain/{id}");
            std::fs::create_dir_all(dir.join(&base)).with_context(|| format!("creating {base}"))?;
            write_volume(&p.intensity, dir.join(format!("{base}/intensity.mhd")))?;
            write_labels(&p.labels, dir.join(format!("{base}/labels.mhd")))?;
            write_volume(&p.bias, dir.join(format!("{base}/bias.mhd")))?;
            let dims = p.intensity.dims();
            files.push(vec![
                "brain".into(),
                id.clone(),
                format!("{base}/intensity.mhd"),
                format!("{}x{}x{}", dims[0], dims[1], dims[2]),
            ]);
            cases.push(json!({
                "id": id,
                "intensity": format!("{id}/intensity.mhd"),
                "labels": format!("{id}/labels.mhd"),
            }));
        }
        let config = json!({"pipeline": "brain", "seed": run.seed, "source": {"files": cases}});
        write_text(&dir.join("brain/brain.json"), &serde_json::to_string_pretty(&config)?)?;
        report.outputs.push("brain/brain.json".into());
    }

    if let Some(l) = &run.lung {
        let mut cases = Vec::new();
        for i in 0..l.cases {
            let id = format!("case{:02}", i + 1);
            let base = format!("lung/{id}");
            std::fs::create_dir_all(dir.join(&base))?;
            let slice = gen_lung_slice(&l.slice_for(i))?;
            let pair = gen_registration_pair(&slice.image, &l.pair)?;
            write_volume(&pair.fixed, dir.join(format!("{base}/fixed.mhd")))?;
            write_volume(&pair.moving, dir.join(format!("{base}/moving.mhd")))?;
            let g = *pair.fixed.geometry();
            write_labels(
                &LabelVolume::binary(g, &slice.lungs)?,
                dir.join(format!("{base}/lungs.mhd")),
            )?;
            write_landmarks(&pair.fixed_landmarks, dir.join(format!("{base}/fixed_landmarks.txt")))?;
            write_landmarks(&pair.moving_landmarks, dir.join(format!("{base}/moving_landmarks.txt")))?;
            files.push(vec![
                "lung".into(),
                id.clone(),
                format!("{base}/fixed.mhd"),
                format!("{} landmarks", pair.fixed_landmarks.len()),
            ]);
            cases.push(json!({
                "id": id,
                "fixed": format!("{id}/fixed.mhd"),
                "moving": format!("{id}/moving.mhd"),
                "fixed_landmarks": format!("{id}/fixed_landmarks.txt"),
                "moving_landmarks": format!("{id}/moving_landmarks.txt"),
            }));
        }
        let config = json!({"pipeline": "lung", "seed": run.seed, "source": {"files": cases}});
        write_text(&dir.join("lung/lung.json"), &serde_json::to_string_pretty(&config)?)?;
        report.outputs.push("lung/lung.json".into());
    }

    if let Some(c) = &run.lesion {
        let data = gen_lesion_dataset(c)?;
        std::fs::create_dir_all(dir.join("lesion/images"))?;
        let mut entries = Vec::new();
        let mut labels = csv::Writer::from_writer(Vec::new());
        labels.write_record(["image", "label", "hue"])?;
        for (i, img) in data.images.iter().enumerate() {
            let rel = format!("images/lesion{:03}.ppm", i + 1);
            write_color(img, dir.join("lesion").join(&rel))?;
            labels.write_record([rel.clone(), data.labels[i].to_string(), fmt(data.hues[i])])?;
            entries.push(json!({"path": rel, "label": data.labels[i]}));
        }
        write_text(
            &dir.join("lesion/labels.csv"),
            &String::from_utf8(labels.into_inner()?)?,
        )?;
        for (k, n) in c.counts.iter().enumerate() {
            files.push(vec![
                "lesion".into(),
                format!("class {k}"),
                "lesion/images".into(),
                format!("{n} images"),
            ]);
        }
        let config = json!({"pipeline": "lesion", "seed": run.seed, "source": {"images": entries}});
        write_text(&dir.join("lesion/lesion.json"), &serde_json::to_string_pretty(&config)?)?;
        report.outputs.push("lesion/labels.csv".into());
        report.outputs.push("lesion/lesion.json".into());
    }

    report.tables.push(files);
    report.write(dir)?;
    Ok(report)
}
