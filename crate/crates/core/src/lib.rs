pub mod groebner;
pub mod linalg;
pub mod poly;
pub mod graded;
pub mod foliation;
pub mod resolution;
pub mod qfield;
pub mod buildq;
pub mod isotropy;
