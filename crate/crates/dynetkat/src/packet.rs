//! Finite packet domains and the complete-test/complete-assignment vocabulary.
//!
//! A schema declares an ordered list of fields, each with a finite ordered
//! value domain. Packets are total assignments of every field; they are in
//! bijection with complete tests and complete assignments, and with indices
//! into the canonical (lexicographic) packet enumeration.

use std::fmt;

use crate::error::{Error, Result};

/// Ordered list of named fields with finite value domains.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldSchema {
    fields: Vec<Field>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Field {
    pub name: String,
    pub values: Vec<String>,
}

/// A packet: one value index per schema field, in schema field order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Packet(pub Vec<u32>);

/// Role of a complete point: a test `f1 = v1 · ... · fn = vn` or an
/// assignment `f1 <- v1 · ... · fn <- vn`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PointRole {
    Test,
    Assignment,
}

/// A complete test or complete assignment; fixes every field of the schema.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompletePoint {
    pub values: Vec<u32>,
    pub role: PointRole,
}

impl FieldSchema {
    /// Builds a schema, rejecting empty schemas, duplicate field names and
    /// empty domains.
    pub fn new(fields: Vec<(String, Vec<String>)>) -> Result<FieldSchema> {
        if fields.is_empty() {
            return Err(Error::Schema("schema must declare at least one field".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (name, values) in &fields {
            if !seen.insert(name.clone()) {
                return Err(Error::Schema(format!("duplicate field `{name}`")));
            }
            if values.is_empty() {
                return Err(Error::Schema(format!("field `{name}` has an empty domain")));
            }
            let mut vs = std::collections::HashSet::new();
            for v in values {
                if !vs.insert(v) {
                    return Err(Error::Schema(format!(
                        "field `{name}` repeats value `{v}`"
                    )));
                }
            }
        }
        Ok(FieldSchema {
            fields: fields
                .into_iter()
                .map(|(name, values)| Field { name, values })
                .collect(),
        })
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field_index(&self, name: &str) -> Result<usize> {
        self.fields
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownField(name.to_string()))
    }

    pub fn value_index(&self, field: usize, value: &str) -> Result<u32> {
        self.fields[field]
            .values
            .iter()
            .position(|v| v == value)
            .map(|i| i as u32)
            .ok_or_else(|| {
                Error::Schema(format!(
                    "value `{value}` not in the domain of field `{}`",
                    self.fields[field].name
                ))
            })
    }

    /// Total number of packets: the product of the domain sizes.
    pub fn packet_count(&self) -> u64 {
        self.fields.iter().map(|f| f.values.len() as u64).product()
    }

    /// All packets in canonical order: lexicographic by field order, then
    /// domain order. `packet_index` is the inverse.
    pub fn all_packets(&self) -> Vec<Packet> {
        (0..self.packet_count())
            .map(|i| self.packet_at(i as u32))
            .collect()
    }

    /// The `i`-th packet of the canonical enumeration (mixed-radix decode,
    /// first field most significant).
    pub fn packet_at(&self, index: u32) -> Packet {
        let mut rem = index as u64;
        let mut values = vec![0u32; self.fields.len()];
        for (slot, f) in values.iter_mut().zip(&self.fields).rev() {
            let radix = f.values.len() as u64;
            *slot = (rem % radix) as u32;
            rem /= radix;
        }
        Packet(values)
    }

    pub fn packet_index(&self, p: &Packet) -> u32 {
        let mut index = 0u64;
        for (v, f) in p.0.iter().zip(&self.fields) {
            index = index * f.values.len() as u64 + *v as u64;
        }
        index as u32
    }

    /// Builds a packet from `(field, value)` pairs; every schema field must
    /// be given exactly once.
    pub fn packet_from_pairs(&self, pairs: &[(String, String)]) -> Result<Packet> {
        let mut values = vec![u32::MAX; self.fields.len()];
        for (f, v) in pairs {
            let fi = self.field_index(f)?;
            if values[fi] != u32::MAX {
                return Err(Error::Schema(format!("field `{f}` given twice")));
            }
            values[fi] = self.value_index(fi, v)?;
        }
        if let Some(missing) = values.iter().position(|&v| v == u32::MAX) {
            return Err(Error::Schema(format!(
                "field `{}` missing from complete point",
                self.fields[missing].name
            )));
        }
        Ok(Packet(values))
    }

    pub fn format_packet(&self, p: &Packet) -> String {
        p.0.iter()
            .zip(&self.fields)
            .map(|(v, f)| format!("{}={}", f.name, f.values[*v as usize]))
            .collect::<Vec<_>>()
            .join(".")
    }

    pub fn format_point(&self, point: &CompletePoint) -> String {
        let op = match point.role {
            PointRole::Test => "=",
            PointRole::Assignment => "<-",
        };
        point
            .values
            .iter()
            .zip(&self.fields)
            .map(|(v, f)| format!("{}{op}{}", f.name, f.values[*v as usize]))
            .collect::<Vec<_>>()
            .join(".")
    }
}

/// The packet denoted by a complete point (forgets the role flag).
pub fn packet_of(point: &CompletePoint) -> Packet {
    Packet(point.values.clone())
}

/// The complete test matching exactly `p`.
pub fn test_of(p: &Packet) -> CompletePoint {
    CompletePoint {
        values: p.0.clone(),
        role: PointRole::Test,
    }
}

/// The complete assignment producing exactly `p`.
pub fn assignment_of(p: &Packet) -> CompletePoint {
    CompletePoint {
        values: p.0.clone(),
        role: PointRole::Assignment,
    }
}

/// A finite ordered sequence of packets; `push_front` is list cons.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketList(pub Vec<Packet>);

impl PacketList {
    pub fn empty() -> PacketList {
        PacketList(Vec::new())
    }

    /// `σ::l` — element 0 becomes `p`, the rest shift by one.
    pub fn push_front(&self, p: Packet) -> PacketList {
        let mut items = Vec::with_capacity(self.0.len() + 1);
        items.push(p);
        items.extend(self.0.iter().cloned());
        PacketList(items)
    }

    pub fn head(&self) -> Option<&Packet> {
        self.0.first()
    }

    pub fn tail(&self) -> PacketList {
        PacketList(self.0.iter().skip(1).cloned().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for PointRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointRole::Test => write!(f, "test"),
            PointRole::Assignment => write!(f, "assignment"),
        }
    }
}
