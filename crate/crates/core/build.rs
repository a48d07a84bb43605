fn main() {
    // The semidefinite solver's dense linear algebra is feature-gated behind
    // pluggable BLAS/LAPACK backends; link the system OpenBLAS, which provides
    // both symbol sets.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
