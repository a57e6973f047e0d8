use pyo3::prelude::*;

#[pymodule]
fn kahler_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
