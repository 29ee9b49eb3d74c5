//! C ABI over the equivarify core. Handles are opaque pointers created
//! and destroyed here; every fallible call returns an `EqvStatus` and
//! writes results through out-pointers.
//!
//! All pointers must be non-null and, for arrays, point at the stated
//! number of elements. Passing anything else is undefined behaviour, as
//! usual for a C API; null pointers specifically are caught and reported
//! as `EQV_STATUS_INVALID_ARGUMENT`.

use std::ffi::{c_char, CStr};
use std::sync::Arc;

use equivarify::action::{block_shift_perm, rot90_perm};
use equivarify::group::FiniteGroup;
use equivarify::mnist::data::{argmax, encode_label, NUM_CLASSES, NUM_DIGITS};
use equivarify::mnist::netbuild::load_checkpoint_model;
use equivarify::nn::model::Model;
use equivarify::nn::tensor::{compose_perms, identity_perm, Tensor};

/// Result of an FFI call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum EqvStatus {
    /// Success.
    EqvStatusOk = 0,
    /// A null pointer, out-of-range index, or malformed argument.
    EqvStatusInvalidArgument = 1,
    /// The operation itself failed (IO, format, arithmetic).
    EqvStatusFailure = 2,
}

use EqvStatus::*;

/// Opaque finite group handle.
pub struct EqvGroup {
    inner: Arc<FiniteGroup>,
}

/// Opaque trained-model handle.
pub struct EqvModel {
    inner: Model,
}

/// Creates the cyclic group of order `n`. Returns null on failure.
#[no_mangle]
pub extern "C" fn eqv_group_cyclic(n: usize) -> *mut EqvGroup {
    match FiniteGroup::cyclic(n) {
        Ok(g) => Box::into_raw(Box::new(EqvGroup { inner: Arc::new(g) })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Creates the dihedral group of order `2n`. Returns null on failure.
#[no_mangle]
pub extern "C" fn eqv_group_dihedral(n: usize) -> *mut EqvGroup {
    match FiniteGroup::dihedral(n) {
        Ok(g) => Box::into_raw(Box::new(EqvGroup { inner: Arc::new(g) })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Frees a group handle. Null is a no-op.
#[no_mangle]
pub extern "C" fn eqv_group_free(group: *mut EqvGroup) {
    if !group.is_null() {
        drop(unsafe { Box::from_raw(group) });
    }
}

/// Number of elements, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn eqv_group_order(group: *const EqvGroup) -> usize {
    match unsafe { group.as_ref() } {
        Some(g) => g.inner.order(),
        None => 0,
    }
}

/// Writes `a * b` to `out`.
#[no_mangle]
pub extern "C" fn eqv_group_mul(
    group: *const EqvGroup,
    a: usize,
    b: usize,
    out: *mut usize,
) -> EqvStatus {
    let (Some(g), Some(out)) = (unsafe { group.as_ref() }, unsafe { out.as_mut() }) else {
        return EqvStatusInvalidArgument;
    };
    match g.inner.compose(a, b) {
        Ok(c) => {
            *out = c;
            EqvStatusOk
        }
        Err(_) => EqvStatusInvalidArgument,
    }
}

/// Writes `a^-1` to `out`.
#[no_mangle]
pub extern "C" fn eqv_group_inverse(
    group: *const EqvGroup,
    a: usize,
    out: *mut usize,
) -> EqvStatus {
    let (Some(g), Some(out)) = (unsafe { group.as_ref() }, unsafe { out.as_mut() }) else {
        return EqvStatusInvalidArgument;
    };
    match g.inner.inverse(a) {
        Ok(c) => {
            *out = c;
            EqvStatusOk
        }
        Err(_) => EqvStatusInvalidArgument,
    }
}

/// 1 when the multiplication table satisfies the group axioms, 0 when it
/// does not or the handle is null.
#[no_mangle]
pub extern "C" fn eqv_group_axioms_ok(group: *const EqvGroup) -> i32 {
    match unsafe { group.as_ref() } {
        Some(g) => g.inner.check_axioms().is_empty() as i32,
        None => 0,
    }
}

/// Rotates an `h x w x channels` row-major image by `quarter_turns` 90°
/// counterclockwise steps, as an exact index permutation. `input` and
/// `output` must each hold `h * w * channels` doubles and must not
/// alias. Requires `h == w`.
#[no_mangle]
pub extern "C" fn eqv_rot90_apply(
    quarter_turns: usize,
    h: usize,
    w: usize,
    channels: usize,
    input: *const f64,
    output: *mut f64,
) -> EqvStatus {
    if input.is_null() || output.is_null() || h != w || h == 0 || channels == 0 {
        return EqvStatusInvalidArgument;
    }
    let len = h * w * channels;
    let input = unsafe { std::slice::from_raw_parts(input, len) };
    let output = unsafe { std::slice::from_raw_parts_mut(output, len) };
    let base = rot90_perm(h, channels);
    let mut perm = identity_perm(len);
    for _ in 0..quarter_turns % 4 {
        perm = compose_perms(&base, &perm);
    }
    for (o, &p) in output.iter_mut().zip(&perm) {
        *o = input[p];
    }
    EqvStatusOk
}

/// Writes the one-hot joint label for (digit, angle_index) into
/// `out[40]`, slot = angle * 10 + digit.
#[no_mangle]
pub extern "C" fn eqv_encode_label(digit: u8, angle_index: u8, out: *mut f64) -> EqvStatus {
    if out.is_null() {
        return EqvStatusInvalidArgument;
    }
    match encode_label(digit, angle_index) {
        Ok(t) => {
            let out = unsafe { std::slice::from_raw_parts_mut(out, NUM_CLASSES) };
            out.copy_from_slice(t.data());
            EqvStatusOk
        }
        Err(_) => EqvStatusInvalidArgument,
    }
}

/// Loads a checkpoint produced by the CLI; the architecture is rebuilt
/// from the stored hyperparameters. Returns null on failure.
#[no_mangle]
pub extern "C" fn eqv_model_load(path: *const c_char) -> *mut EqvModel {
    if path.is_null() {
        return std::ptr::null_mut();
    }
    let Ok(path) = unsafe { CStr::from_ptr(path) }.to_str() else {
        return std::ptr::null_mut();
    };
    match load_checkpoint_model(std::path::Path::new(path)) {
        Ok((_, model)) => Box::into_raw(Box::new(EqvModel { inner: model })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Frees a model handle. Null is a no-op.
#[no_mangle]
pub extern "C" fn eqv_model_free(model: *mut EqvModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Runs the model on a 28x28x1 row-major image and writes the 40 raw
/// logits (angle-major blocks of 10) to `logits_out[40]`.
#[no_mangle]
pub extern "C" fn eqv_model_predict(
    model: *const EqvModel,
    input: *const f64,
    logits_out: *mut f64,
) -> EqvStatus {
    let Some(m) = (unsafe { model.as_ref() }) else {
        return EqvStatusInvalidArgument;
    };
    if input.is_null() || logits_out.is_null() {
        return EqvStatusInvalidArgument;
    }
    let input = unsafe { std::slice::from_raw_parts(input, 28 * 28) };
    let Ok(x) = Tensor::new(vec![28, 28, 1], input.to_vec()) else {
        return EqvStatusInvalidArgument;
    };
    match m.inner.forward(&x) {
        Ok(out) => {
            let logits = unsafe { std::slice::from_raw_parts_mut(logits_out, NUM_CLASSES) };
            logits.copy_from_slice(out.data());
            EqvStatusOk
        }
        Err(_) => EqvStatusFailure,
    }
}

/// Convenience argmax over the joint logits: writes the predicted digit
/// and angle index.
#[no_mangle]
pub extern "C" fn eqv_model_classify(
    model: *const EqvModel,
    input: *const f64,
    digit_out: *mut u8,
    angle_out: *mut u8,
) -> EqvStatus {
    let (Some(digit_out), Some(angle_out)) =
        (unsafe { digit_out.as_mut() }, unsafe { angle_out.as_mut() })
    else {
        return EqvStatusInvalidArgument;
    };
    let mut logits = [0.0f64; NUM_CLASSES];
    let status = eqv_model_predict(model, input, logits.as_mut_ptr());
    if status != EqvStatusOk {
        return status;
    }
    let pred = argmax(&logits);
    *digit_out = (pred % NUM_DIGITS) as u8;
    *angle_out = (pred / NUM_DIGITS) as u8;
    EqvStatusOk
}

/// Applies the induced C4 block-shift action of element `g` to a vector
/// of `4 * block_size` doubles (the G-product layout).
#[no_mangle]
pub extern "C" fn eqv_block_shift_apply(
    g: usize,
    block_size: usize,
    input: *const f64,
    output: *mut f64,
) -> EqvStatus {
    if input.is_null() || output.is_null() || block_size == 0 || g >= 4 {
        return EqvStatusInvalidArgument;
    }
    let Ok(group) = FiniteGroup::cyclic(4) else {
        return EqvStatusFailure;
    };
    let perm = block_shift_perm(&group, g, block_size);
    let len = perm.len();
    let input = unsafe { std::slice::from_raw_parts(input, len) };
    let output = unsafe { std::slice::from_raw_parts_mut(output, len) };
    for (o, &p) in output.iter_mut().zip(&perm) {
        *o = input[p];
    }
    EqvStatusOk
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_roundtrip() {
        let g = eqv_group_cyclic(4);
        assert!(!g.is_null());
        assert_eq!(eqv_group_order(g), 4);
        assert_eq!(eqv_group_axioms_ok(g), 1);
        let mut out = 0usize;
        assert!(eqv_group_mul(g, 3, 2, &mut out) == EqvStatusOk);
        assert_eq!(out, 1);
        assert!(eqv_group_inverse(g, 3, &mut out) == EqvStatusOk);
        assert_eq!(out, 1);
        assert!(eqv_group_mul(g, 9, 0, &mut out) == EqvStatusInvalidArgument);
        eqv_group_free(g);
    }

    #[test]
    fn dihedral_order() {
        let g = eqv_group_dihedral(3);
        assert_eq!(eqv_group_order(g), 6);
        eqv_group_free(g);
    }

    #[test]
    fn rot90_quarter_turn() {
        let input = [1.0, 2.0, 3.0, 4.0];
        let mut out = [0.0; 4];
        assert!(eqv_rot90_apply(1, 2, 2, 1, input.as_ptr(), out.as_mut_ptr()) == EqvStatusOk);
        // [[1,2],[3,4]] rotated 90 CCW -> [[2,4],[1,3]]
        assert_eq!(out, [2.0, 4.0, 1.0, 3.0]);
        let mut round = [0.0; 4];
        let mut tmp = out;
        for _ in 0..3 {
            assert!(eqv_rot90_apply(1, 2, 2, 1, tmp.as_ptr(), round.as_mut_ptr()) == EqvStatusOk);
            tmp = round;
        }
        assert_eq!(tmp, input);
    }

    #[test]
    fn label_encoding() {
        let mut out = [0.0f64; 40];
        assert!(eqv_encode_label(7, 2, out.as_mut_ptr()) == EqvStatusOk);
        assert_eq!(out[27], 1.0);
        assert_eq!(out.iter().sum::<f64>(), 1.0);
        assert!(eqv_encode_label(10, 0, out.as_mut_ptr()) == EqvStatusInvalidArgument);
    }

    #[test]
    fn null_handling() {
        assert_eq!(eqv_group_order(std::ptr::null()), 0);
        let mut out = 0usize;
        assert!(
            eqv_group_mul(std::ptr::null(), 0, 0, &mut out) == EqvStatusInvalidArgument
        );
        assert!(eqv_model_load(std::ptr::null()).is_null());
        eqv_group_free(std::ptr::null_mut());
        eqv_model_free(std::ptr::null_mut());
    }

    #[test]
    fn block_shift_matches_convention() {
        let input: Vec<f64> = (0..8).map(|v| v as f64).collect();
        let mut out = [0.0f64; 8];
        // generator sends (z0,z1,z2,z3) to (z3,z0,z1,z2)
        assert!(eqv_block_shift_apply(1, 2, input.as_ptr(), out.as_mut_ptr()) == EqvStatusOk);
        assert_eq!(out, [6.0, 7.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }
}
