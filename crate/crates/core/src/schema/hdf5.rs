use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use hdf5::types::{FloatSize, IntSize, TypeDescriptor, VarLenAscii, VarLenUnicode};
use hdf5::{Group, LinkType, LocationType};
use sha2::{Digest, Sha256};

use super::{truncate_preview, Attribute, DatasetEntry, SchemaError, SchemaIndex};

const HDF5_SIGNATURE: &[u8; 8] = b"\x89HDF\r\n\x1a\n";

/// Walks an HDF5 container and records every group and dataset reachable
/// through hard links. Soft and external links are not followed.
pub fn extract_schema(path: &Path) -> Result<SchemaIndex, SchemaError> {
    if !path.is_file() {
        return Err(SchemaError::FileNotFound(path.to_path_buf()));
    }
    let source_id = fingerprint(path)?;
    if !has_signature(path)? {
        return Err(SchemaError::NotAnHdf5Container(path.to_path_buf()));
    }
    let corrupt = |e: hdf5::Error| SchemaError::CorruptFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };

    let file = hdf5::File::open(path).map_err(corrupt)?;
    let mut walk = Walk::default();
    let root: &Group = &file;
    walk.visit(root, "/").map_err(corrupt)?;

    let datasets = walk
        .datasets
        .into_iter()
        .map(|(p, shape, dtype, attrs)| DatasetEntry::new(p, shape, dtype, attrs))
        .collect::<Result<Vec<_>, _>>()?;
    SchemaIndex::new(source_id, walk.groups, datasets)
}

type RawDataset = (String, Vec<u64>, String, Vec<Attribute>);

#[derive(Default)]
struct Walk {
    groups: Vec<String>,
    datasets: Vec<RawDataset>,
    seen_groups: HashSet<String>,
}

impl Walk {
    fn visit(&mut self, group: &Group, path: &str) -> hdf5::Result<()> {
        self.groups.push(path.to_string());
        let info = group.loc_info()?;
        // hard links can form cycles
        if !self.seen_groups.insert(format!("{:?}", info.token)) {
            return Ok(());
        }
        let links = group.iter_visit_default(Vec::new(), |_, name, info, acc| {
            acc.push((name.to_string(), info.link_type));
            true
        })?;
        for (name, link_type) in links {
            if link_type != LinkType::Hard {
                continue;
            }
            let child = join(path, &name);
            match group.loc_type_by_name(&name)? {
                LocationType::Group => {
                    let sub = group.group(&name)?;
                    self.visit(&sub, &child)?;
                }
                LocationType::Dataset => {
                    let ds = group.dataset(&name)?;
                    let shape = ds.shape().into_iter().map(|d| d as u64).collect();
                    let dtype = dtype_tag(&ds.dtype()?.to_descriptor()?);
                    let mut attrs = Vec::new();
                    for attr_name in ds.attr_names()? {
                        let attr = ds.attr(&attr_name)?;
                        attrs.push(Attribute {
                            preview: attribute_preview(&attr),
                            name: attr_name,
                        });
                    }
                    self.datasets.push((child, shape, dtype, attrs));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn join(parent: &str, name: &str) -> String {
    if parent == "/" {
        format!("/{name}")
    } else {
        format!("{parent}/{name}")
    }
}

fn fingerprint(path: &Path) -> Result<String, SchemaError> {
    let io_err = |source| SchemaError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::fs::File::open(path).map_err(io_err)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(io_err)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// The superblock signature sits at offset 0, 512, 1024, 2048, ...
fn has_signature(path: &Path) -> Result<bool, SchemaError> {
    let bytes = std::fs::read(path).map_err(|source| SchemaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut offset = 0usize;
    while offset + HDF5_SIGNATURE.len() <= bytes.len() {
        if &bytes[offset..offset + HDF5_SIGNATURE.len()] == HDF5_SIGNATURE {
            return Ok(true);
        }
        offset = if offset == 0 { 512 } else { offset * 2 };
    }
    Ok(false)
}

fn dtype_tag(desc: &TypeDescriptor) -> String {
    match desc {
        TypeDescriptor::FixedAscii(_) | TypeDescriptor::VarLenAscii => "ascii".into(),
        TypeDescriptor::FixedUnicode(_) | TypeDescriptor::VarLenUnicode => "utf8".into(),
        TypeDescriptor::Compound(_) => "compound".into(),
        TypeDescriptor::Enum(_) => "enum".into(),
        TypeDescriptor::Reference(_) => "reference".into(),
        other => other.to_string(),
    }
}

fn attribute_preview(attr: &hdf5::Attribute) -> String {
    let desc = match attr.dtype().and_then(|t| t.to_descriptor()) {
        Ok(d) => d,
        Err(_) => return "<unreadable>".into(),
    };
    let shape = attr.shape();
    if !shape.is_empty() && shape.iter().product::<usize>() != 1 {
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        return format!("array[{}]", dims.join(","));
    }
    let rendered = read_scalar(attr, &desc, shape.is_empty());
    truncate_preview(&rendered.unwrap_or_else(|| format!("<{}>", dtype_tag(&desc))))
}

fn read_scalar(attr: &hdf5::Attribute, desc: &TypeDescriptor, scalar: bool) -> Option<String> {
    fn one<T: hdf5::H5Type + ToString>(attr: &hdf5::Attribute, scalar: bool) -> Option<String> {
        if scalar {
            attr.read_scalar::<T>().ok().map(|v| v.to_string())
        } else {
            attr.read_raw::<T>().ok()?.first().map(ToString::to_string)
        }
    }
    match desc {
        TypeDescriptor::Integer(IntSize::U1) => one::<i8>(attr, scalar),
        TypeDescriptor::Integer(IntSize::U2) => one::<i16>(attr, scalar),
        TypeDescriptor::Integer(IntSize::U4) => one::<i32>(attr, scalar),
        TypeDescriptor::Integer(IntSize::U8) => one::<i64>(attr, scalar),
        TypeDescriptor::Unsigned(IntSize::U1) => one::<u8>(attr, scalar),
        TypeDescriptor::Unsigned(IntSize::U2) => one::<u16>(attr, scalar),
        TypeDescriptor::Unsigned(IntSize::U4) => one::<u32>(attr, scalar),
        TypeDescriptor::Unsigned(IntSize::U8) => one::<u64>(attr, scalar),
        TypeDescriptor::Float(FloatSize::U4) => one::<f32>(attr, scalar),
        TypeDescriptor::Float(FloatSize::U8) => one::<f64>(attr, scalar),
        TypeDescriptor::Boolean => one::<bool>(attr, scalar),
        TypeDescriptor::VarLenUnicode => one::<VarLenUnicode>(attr, scalar),
        TypeDescriptor::VarLenAscii => one::<VarLenAscii>(attr, scalar),
        TypeDescriptor::FixedAscii(_) | TypeDescriptor::FixedUnicode(_) => {
            // fixed-width strings: read through the variable-length path
            attr.as_reader()
                .read_raw::<VarLenUnicode>()
                .ok()
                .and_then(|v| v.first().map(|s| s.to_string()))
        }
        _ => None,
    }
}
