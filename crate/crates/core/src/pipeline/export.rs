use std::collections::BTreeSet;

use crate::datamodel::{
    validate, AnnotationId, Dataset, GroundTruthAnnotation, ImageId, ImageRecord, Subject,
};

use super::candidate::{Candidate, Status};
use super::ontology::Ontology;
use super::PipelineError;

/// Builds a dataset with one image and one annotation per approved candidate.
///
/// Candidates are numbered in id order, so the same set always exports to the
/// same bytes. Only categories that occur are listed.
pub fn export_dataset<'a, I>(candidates: I, ont: &Ontology) -> Result<Dataset, PipelineError>
where
    I: IntoIterator<Item = &'a Candidate>,
{
    let mut cands: Vec<&Candidate> = candidates.into_iter().collect();
    cands.sort_by(|a, b| a.id.cmp(&b.id));

    let mut d = Dataset::default();
    let mut used = BTreeSet::new();
    for (i, c) in cands.iter().enumerate() {
        let fail = |message: &str| PipelineError::Export {
            candidate: c.id.clone(),
            message: message.to_string(),
        };
        if c.status != Status::Approved {
            return Err(fail(&format!("status is {}", c.status)));
        }
        if c.label.is_none() {
            return Err(fail("no label"));
        }
        let [b] = c.boxes.as_slice() else {
            return Err(fail(&format!("{} boxes", c.boxes.len())));
        };
        let mask = c.mask.clone().ok_or_else(|| fail("no mask"))?;
        let category = c
            .category
            .and_then(|id| ont.category(id))
            .ok_or_else(|| fail("no ontology category"))?;
        let (width, height) = c.image.extent().ok_or_else(|| fail("unknown image size"))?;

        let id = i as u64 + 1;
        d.images.push(ImageRecord {
            id: ImageId(id),
            width,
            height,
            file_name: c.image.path.clone(),
        });
        d.annotations.push(GroundTruthAnnotation {
            id: AnnotationId(id),
            image_id: ImageId(id),
            category_id: category.id,
            bbox: b.bbox,
            area: mask.area() as f64,
            mask: Some(mask),
        });
        used.insert(category.id);
    }
    d.categories = ont
        .categories
        .iter()
        .filter(|c| used.contains(&c.id))
        .cloned()
        .collect();

    if let Some(v) = validate(&d).into_iter().next() {
        let idx = match v.subject {
            Subject::Image(id) => Some(id.0),
            Subject::Annotation(id) => Some(id.0),
            Subject::Category(_) => None,
        };
        let candidate = idx
            .and_then(|i| cands.get(i as usize - 1))
            .or(cands.first())
            .map(|c| c.id.clone())
            .unwrap_or_default();
        return Err(PipelineError::Export {
            candidate,
            message: v.to_string(),
        });
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::BBox;
    use crate::geometry::{rle_encode, BitMask};
    use crate::pipeline::candidate::{ImageRef, ScoredBox};
    use crate::pipeline::ontology::map_label;

    fn approved(product: &str, label: &str) -> Candidate {
        let ont = Ontology::default();
        let bbox = BBox::new(2.0, 3.0, 10.0, 5.0);
        let mut c = Candidate::new(
            product,
            0,
            "d",
            ImageRef {
                path: format!("{product}.jpg"),
                width: Some(20),
                height: Some(10),
            },
        );
        c.label = Some(label.into());
        c.category = Some(map_label(label, &ont).unwrap().id);
        c.boxes = vec![ScoredBox { bbox, score: 0.8 }];
        c.mask = Some(rle_encode(&BitMask::from_box(10, 20, &bbox)));
        c.status = Status::Approved;
        c
    }

    #[test]
    fn empty_export_is_valid() {
        let d = export_dataset([], &Ontology::default()).unwrap();
        assert_eq!(d.sizes(), (0, 0, 0));
    }

    #[test]
    fn one_annotation_per_image() {
        let cs = [
            approved("b", "shoe"),
            approved("a", "shoe"),
            approved("c", "hat"),
        ];
        let d = export_dataset(&cs, &Ontology::default()).unwrap();
        assert_eq!(d.sizes(), (3, 3, 2));
        assert_eq!(d.images[0].file_name, "a.jpg");
        assert_eq!(d.annotations[0].area, 50.0);
        assert!(validate(&d).is_empty());
    }

    #[test]
    fn unapproved_candidate_aborts() {
        let mut c = approved("x", "shoe");
        c.status = Status::AwaitingReview;
        let err = export_dataset([&c], &Ontology::default()).unwrap_err();
        assert!(err.to_string().contains("x_0"), "{err}");
    }

    #[test]
    fn invalid_box_names_the_candidate() {
        let ok = approved("a", "shoe");
        let mut bad = approved("b", "shoe");
        bad.boxes[0].bbox = BBox::new(15.0, 0.0, 10.0, 5.0);
        let err = export_dataset([&ok, &bad], &Ontology::default()).unwrap_err();
        assert!(
            matches!(&err, PipelineError::Export { candidate, .. } if candidate.as_str() == "b_0")
        );
    }
}
