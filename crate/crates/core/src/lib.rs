//! audvault: publish, version, cache, and load annotated audio datasets.
//!
//! A dataset is a root folder with a YAML header (`db.yaml`), CSV annotation
//! tables (`db.<table id>.csv`), and the referenced WAV files. Publishing
//! uploads a version to a repository; a dependency table records for every
//! file in which version its content lives, so new versions only upload new
//! or altered files. Loading materializes a self-contained copy in a local
//! cache, reusing files from other cached versions where possible, and can
//! convert audio to a requested flavour (bit depth, sampling rate, channel
//! selection, mix-down).

pub mod audio;
pub mod backend;
pub mod cache;
pub mod config;
pub mod datacard;
pub mod dataset;
pub mod deps;
pub mod digest;
pub mod duration;
pub mod error;
pub mod flavour;
pub mod header;
pub mod index;
pub mod loader;
pub mod publisher;
pub mod scheme;
pub mod snapshot;
pub mod table;
pub mod table_csv;
pub mod value;
pub mod version;

pub use audio::{AudioBuffer, SampleFormat, WavInfo};
pub use backend::{register_backend, resolve_repository, Backend, BackendPath, Repository};
pub use cache::{Cache, CacheKey};
pub use config::Config;
pub use datacard::render_datacard;
pub use dataset::Dataset;
pub use deps::{ChangeSet, DepEntry, DepKind, DependencyTable};
pub use duration::Duration;
pub use error::{Error, Result};
pub use flavour::Flavour;
pub use header::{parse_header, serialize_header, Header};
pub use index::{FilePath, Index, IndexKind, Segment};
pub use loader::{
    available, info_header, info_schemes, load, search_by_scheme, LoadOptions, LoadRequest,
    LoadedDataset,
};
pub use publisher::{load_to, publish, remove_media, PreviousVersion, PublishReport};
pub use scheme::{validate_value, Labels, Scheme, Violation};
pub use table::{Column, SchemeContext, Table, ValueFrame};
pub use table_csv::{parse_table_csv, serialize_table_csv};
pub use value::{Dtype, Value};
pub use version::Version;
