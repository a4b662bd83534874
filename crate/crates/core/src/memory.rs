//! Memory images exchanged between the interpreter, the simulator and the CLI.
//!
//! On disk an image is `{"name": "<arg-id>", "length": N, "data": [...]}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryImage {
    pub name: String,
    pub length: usize,
    pub data: Vec<i32>,
}

/// Images keyed by memory name.
pub type MemorySet = BTreeMap<String, MemoryImage>;

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("malformed memory image: {0}")]
    Json(#[from] serde_json::Error),
    #[error("memory image `{name}` declares length {length} but holds {actual} values")]
    LengthMismatch { name: String, length: usize, actual: usize },
}

impl MemoryImage {
    pub fn new(name: impl Into<String>, data: Vec<i32>) -> Self {
        MemoryImage { name: name.into(), length: data.len(), data }
    }

    pub fn zeros(name: impl Into<String>, length: usize) -> Self {
        MemoryImage::new(name, vec![0; length])
    }

    pub fn from_json(text: &str) -> Result<Self, ImageError> {
        let image: MemoryImage = serde_json::from_str(text)?;
        image.check()?;
        Ok(image)
    }

    fn check(&self) -> Result<(), ImageError> {
        if self.length != self.data.len() {
            return Err(ImageError::LengthMismatch {
                name: self.name.clone(),
                length: self.length,
                actual: self.data.len(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("memory image serializes")
    }
}

pub fn memory_set(images: impl IntoIterator<Item = MemoryImage>) -> MemorySet {
    images.into_iter().map(|m| (m.name.clone(), m)).collect()
}

/// Serializes a set as a JSON array ordered by name.
pub fn set_to_json(set: &MemorySet) -> String {
    let images: Vec<&MemoryImage> = set.values().collect();
    serde_json::to_string_pretty(&images).expect("memory images serialize")
}

pub fn set_from_json(text: &str) -> Result<MemorySet, ImageError> {
    let images: Vec<MemoryImage> = serde_json::from_str(text)?;
    for image in &images {
        image.check()?;
    }
    Ok(memory_set(images))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_image() {
        let m = MemoryImage::from_json(r#"{"name": "arg1", "length": 3, "data": [1, -2, 3]}"#).unwrap();
        assert_eq!(m.name, "arg1");
        assert_eq!(m.data, vec![1, -2, 3]);
    }

    #[test]
    fn rejects_length_mismatch() {
        let err = MemoryImage::from_json(r#"{"name": "a", "length": 2, "data": [1]}"#).unwrap_err();
        assert!(matches!(err, ImageError::LengthMismatch { length: 2, actual: 1, .. }));
    }

    #[test]
    fn field_order_is_stable() {
        let m = MemoryImage::new("c", vec![7]);
        assert_eq!(m.to_json(), r#"{"name":"c","length":1,"data":[7]}"#);
    }
}
