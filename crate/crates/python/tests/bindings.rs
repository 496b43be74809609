use pyo3::ffi::c_str;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &std::ffi::CStr) {
    Python::with_gil(|py| {
        let m = pyo3::wrap_pymodule!(pylitcoref::pylitcoref)(py);
        let globals = PyDict::new(py);
        globals.set_item("lc", m).unwrap();
        if let Err(e) = py.run(code, Some(&globals), None) {
            e.print(py);
            panic!("python failed");
        }
    });
}

#[test]
fn worked_fixture_through_python() {
    run(c_str!(
        r#"
r = lc.score([["a", "b", "c"], ["d"]], [["a", "b"], ["c", "d"]])
assert abs(r["conll_f1"] - 0.64640) < 1e-5, r
assert r["muc"]["recall"] == 0.5
"#
    ));
}

#[test]
fn resolve_and_errors() {
    run(c_str!(
        r#"
docs, names = lc.synthetic_corpus("short", seed=1)
out = lc.resolve(docs[0], "oracle", strategy="easy-first-global")
assert lc.score_documents(docs[0], docs[0], out["chains"])["conll_f1"] == 1.0
spans = lc.chain_spans(docs[0], out["chains"])
assert sum(len(c) for c in spans) == len(docs[0].mentions)
for bad in [lambda: lc.resolve(docs[0]), lambda: lc.resolve(docs[0], "oracle", strategy="sideways"),
            lambda: lc.Document.from_json("{}"), lambda: lc.split(docs[0], 0)]:
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")
"#
    ));
}
