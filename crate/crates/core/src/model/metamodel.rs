use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveType {
    String,
    Int,
    Float,
    Bool,
}

impl fmt::Display for PrimitiveType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrimitiveType::String => "string",
            PrimitiveType::Int => "int",
            PrimitiveType::Float => "float",
            PrimitiveType::Bool => "bool",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: PrimitiveType,
}

/// Ordered containment of elements of one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionDef {
    pub name: String,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceDef {
    pub name: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<AttributeDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collections: Vec<CollectionDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<ReferenceDef>,
}

/// What a feature name denotes within a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature<'a> {
    Attribute(PrimitiveType),
    Collection(&'a str),
    Reference { target: &'a str, optional: bool },
}

impl ClassDef {
    pub fn feature(&self, name: &str) -> Option<Feature<'_>> {
        if let Some(a) = self.attributes.iter().find(|a| a.name == name) {
            return Some(Feature::Attribute(a.ty));
        }
        if let Some(c) = self.collections.iter().find(|c| c.name == name) {
            return Some(Feature::Collection(&c.class));
        }
        self.references
            .iter()
            .find(|r| r.name == name)
            .map(|r| Feature::Reference {
                target: &r.target,
                optional: r.optional,
            })
    }

    pub fn attribute(&self, name: &str) -> Option<PrimitiveType> {
        self.attributes.iter().find(|a| a.name == name).map(|a| a.ty)
    }

    pub fn collection(&self, name: &str) -> Option<&str> {
        self.collections
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.class.as_str())
    }

    pub fn reference(&self, name: &str) -> Option<&ReferenceDef> {
        self.references.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metamodel {
    pub name: String,
    pub classes: Vec<ClassDef>,
}

impl Metamodel {
    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Checks name uniqueness and that every class reference names a class.
    pub fn validate(&self) -> Result<(), ModelError> {
        let schema = |location: String, message: String| ModelError::Schema { location, message };
        let mut classes = BTreeSet::new();
        for (ci, class) in self.classes.iter().enumerate() {
            if !classes.insert(class.name.as_str()) {
                return Err(schema(
                    format!("classes[{ci}]"),
                    format!("duplicate class `{}`", class.name),
                ));
            }
            let mut features = BTreeSet::new();
            let names = class
                .attributes
                .iter()
                .map(|a| &a.name)
                .chain(class.collections.iter().map(|c| &c.name))
                .chain(class.references.iter().map(|r| &r.name));
            for name in names {
                if !features.insert(name.as_str()) {
                    return Err(schema(
                        format!("classes[{ci}]"),
                        format!("duplicate feature `{name}` in class `{}`", class.name),
                    ));
                }
            }
        }
        for (ci, class) in self.classes.iter().enumerate() {
            let targets = class
                .collections
                .iter()
                .map(|c| (&c.name, &c.class))
                .chain(class.references.iter().map(|r| (&r.name, &r.target)));
            for (feature, target) in targets {
                if !classes.contains(target.as_str()) {
                    return Err(schema(
                        format!("classes[{ci}].{feature}"),
                        format!("unknown class `{target}` in `{}.{feature}`", class.name),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Parses a metamodel document (`*.mm.json`).
pub fn parse_metamodel(text: &str) -> Result<Metamodel, ModelError> {
    let mm: Metamodel = serde_json::from_str(text).map_err(ModelError::syntax)?;
    mm.validate()?;
    Ok(mm)
}

/// Metamodels indexed by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetamodelRegistry {
    by_name: BTreeMap<String, Metamodel>,
}

impl MetamodelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the previous metamodel with the same name, if any.
    pub fn insert(&mut self, mm: Metamodel) -> Option<Metamodel> {
        self.by_name.insert(mm.name.clone(), mm)
    }

    pub fn get(&self, name: &str) -> Option<&Metamodel> {
        self.by_name.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Metamodel> {
        self.by_name.values()
    }
}

impl FromIterator<Metamodel> for MetamodelRegistry {
    fn from_iter<I: IntoIterator<Item = Metamodel>>(iter: I) -> Self {
        let mut reg = MetamodelRegistry::new();
        for mm in iter {
            reg.insert(mm);
        }
        reg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_metamodel() {
        let mm =
            parse_metamodel(r#"{"name":"M","classes":[{"name":"Node","attributes":[{"name":"id","type":"string"}]}]}"#)
                .unwrap();
        assert_eq!(mm.classes.len(), 1);
        assert_eq!(mm.classes[0].attributes.len(), 1);
        assert_eq!(mm.class("Node").unwrap().attribute("id"), Some(PrimitiveType::String));
    }

    #[test]
    fn duplicate_class_is_a_schema_error() {
        let err = parse_metamodel(r#"{"name":"M","classes":[{"name":"Node"},{"name":"Node"}]}"#).unwrap_err();
        match err {
            ModelError::Schema { message, .. } => assert!(message.contains("Node")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_class_reference_is_a_schema_error() {
        let err =
            parse_metamodel(r#"{"name":"M","classes":[{"name":"A","collections":[{"name":"xs","class":"Ghost"}]}]}"#)
                .unwrap_err();
        assert!(matches!(err, ModelError::Schema { ref message, .. } if message.contains("Ghost")));
    }

    #[test]
    fn duplicate_feature_is_a_schema_error() {
        let err = parse_metamodel(
            r#"{"name":"M","classes":[{"name":"A","attributes":[{"name":"x","type":"int"}],"references":[{"name":"x","target":"A"}]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::Schema { .. }));
    }

    #[test]
    fn malformed_document_is_a_syntax_error() {
        assert!(matches!(parse_metamodel("{"), Err(ModelError::Syntax { .. })));
        assert!(matches!(
            parse_metamodel(r#"{"name":"M","classes":[{"name":"A","bogus":1}]}"#),
            Err(ModelError::Syntax { .. })
        ));
    }
}
