use std::collections::BTreeMap;

use curatekit::datamodel::{load_dataset, save_dataset, validate, AnnotationId};
use curatekit::metrics::{render_table, TableRow};
use curatekit::pipeline::Ontology;
use curatekit::{BBox, Dataset, GroundTruthAnnotation, ImageId, ImageRecord};

#[test]
fn results_table_layout() {
    let rows: Vec<TableRow> =
        serde_json::from_str(include_str!("fixtures/table_rows.json")).unwrap();
    assert_eq!(render_table(&rows), include_str!("fixtures/table.txt"));
}

#[test]
fn published_row_values_survive_rendering() {
    let rows: Vec<TableRow> =
        serde_json::from_str(include_str!("fixtures/table_rows.json")).unwrap();
    let text = render_table(&rows[..1]);
    let cells: Vec<&str> = text
        .lines()
        .nth(3)
        .unwrap()
        .split('|')
        .skip(1)
        .flat_map(str::split_whitespace)
        .collect();
    assert_eq!(
        cells,
        ["21.0", "21.2", "22.1", "22.0", "21.5", "21.5", "32.1", "32.1", "32.7", "32.7"]
    );
}

/// One annotation per image, classes drawn from the checked-in counts.
fn apparel_dataset() -> Dataset {
    let counts: BTreeMap<String, usize> =
        serde_json::from_str(include_str!("fixtures/apparel_class_counts.json")).unwrap();
    let cats = Ontology::default().surviving();
    let mut d = Dataset {
        categories: cats.clone(),
        ..Dataset::default()
    };
    for (name, n) in counts {
        let c = cats.iter().find(|c| c.name == name).unwrap().id;
        for _ in 0..n {
            let i = d.images.len() as u64 + 1;
            d.images.push(ImageRecord {
                id: ImageId(i),
                width: 800,
                height: 600,
                file_name: format!("{i:05}.jpg"),
            });
            d.annotations.push(GroundTruthAnnotation {
                id: AnnotationId(i),
                image_id: ImageId(i),
                category_id: c,
                bbox: BBox::new(100.0, 50.0, 300.0, 400.0),
                mask: None,
                area: 120_000.0,
            });
        }
    }
    d
}

#[test]
fn single_object_dataset_round_trip() {
    let d = apparel_dataset();
    assert!(validate(&d).is_empty());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("annotations.json");
    save_dataset(&d, &path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back.sizes(), (2495, 2495, 22));
    assert_eq!(back, d);
}
