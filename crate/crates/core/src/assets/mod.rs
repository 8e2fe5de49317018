//! Mesh interchange (OBJ, binary glTF) and the on-disk asset library.

mod gltf;
mod library;
mod obj;

pub use gltf::{export_glb, GltfError, Scene, SceneMesh};
pub use library::{
    read_weight_map, scan_library, validate_image_header, write_garment, write_manifest, write_weight_map,
    AssetEntry, AssetError, AssetKind, AssetLibrary, BodyAsset, CatalogueError, Manifest, MotionAsset,
    MANIFEST_SUFFIX,
};
pub use obj::{export_obj, import_obj, ObjError, ObjErrorKind};
