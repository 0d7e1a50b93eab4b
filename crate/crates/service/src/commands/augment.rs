use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};

use curatekit::augment::{apply_pipeline, preview_composite, AugmentConfig, Instance, Sample};
use curatekit::datamodel::{
    load_dataset, save_dataset, AnnotationId, Dataset, GroundTruthAnnotation, ImageRecord,
};
use curatekit::geometry::{rle_decode, rle_encode};

use crate::cli::AugmentArgs;

fn save_image(img: &image::RgbImage, path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    img.save(path)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn augment(a: &AugmentArgs) -> anyhow::Result<String> {
    let cfg = AugmentConfig {
        flip_probability: a.p_flip,
        photometric_probability: a.p_photometric,
        crop_probability: a.p_crop,
        jitter_probability: a.p_jitter,
        jitter_scale_range: (a.scale_min, a.scale_max),
        random_anchor: a.random_anchor,
        seed: a.seed,
        ..AugmentConfig::default()
    };
    cfg.check()?;
    let d = load_dataset(&a.annotations)
        .with_context(|| format!("loading {}", a.annotations.display()))?;

    let mut by_image: BTreeMap<_, Vec<&GroundTruthAnnotation>> = BTreeMap::new();
    for ann in &d.annotations {
        by_image.entry(ann.image_id).or_default().push(ann);
    }

    let mut out = Dataset {
        categories: d.categories.clone(),
        ..Dataset::default()
    };
    for rec in &d.images {
        let src = a.images.join(&rec.file_name);
        let raster = image::open(&src)
            .with_context(|| format!("reading {}", src.display()))?
            .to_rgb8();
        if raster.dimensions() != (rec.width, rec.height) {
            bail!(
                "{} is {}x{} but the annotations say {}x{}",
                src.display(),
                raster.width(),
                raster.height(),
                rec.width,
                rec.height
            );
        }
        let mut instances = Vec::new();
        for ann in by_image.get(&rec.id).into_iter().flatten() {
            let mask = ann.mask.as_ref().map(rle_decode).transpose()?;
            instances.push(Instance {
                bbox: ann.bbox,
                mask,
                label: ann.category_id,
            });
        }
        let sample = Sample::new(raster, instances).with_context(|| format!("image {}", rec.id))?;
        let aug = apply_pipeline(&sample, &cfg, &mut cfg.rng_for(rec.id.0))?;

        save_image(&aug.raster, &a.out.join(&rec.file_name))?;
        if a.preview {
            let stem = Path::new(&rec.file_name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| rec.id.to_string());
            let p = a.out.join("preview").join(format!("{stem}.png"));
            save_image(&preview_composite(&sample, &aug), &p)?;
        }

        out.images.push(ImageRecord {
            width: aug.width(),
            height: aug.height(),
            ..rec.clone()
        });
        for inst in aug.instances {
            let mask = inst.mask.as_ref().map(rle_encode);
            let area = mask.as_ref().map_or(inst.bbox.area(), |m| m.area() as f64);
            out.annotations.push(GroundTruthAnnotation {
                id: AnnotationId(out.annotations.len() as u64 + 1),
                image_id: rec.id,
                category_id: inst.label,
                bbox: inst.bbox,
                mask,
                area,
            });
        }
    }
    let path = a.out.join("annotations.json");
    save_dataset(&out, &path).with_context(|| format!("writing {}", path.display()))?;
    Ok(format!(
        "{} images, {} annotations -> {}\n",
        out.images.len(),
        out.annotations.len(),
        path.display()
    ))
}
