import numpy as np
import pytest

from modules.errors import DimensionMismatchError, UsageError
from modules.core.sdpe_constraints import (
    OffsetField,
    PatchGrid,
    clamp_offsets,
    deformable_sample,
    finite_difference_grad,
    inter_loss,
    intra_loss,
    mirror_offsets,
    row_average,
    sdpe_loss,
)
from modules.image_processing.erp_image import ErpImage


def brute_force_intra(data):
    """Materialize the mirrored field element by element and sum squared distances."""
    rows, cols, s, _, _ = data.shape
    total = 0.0
    for m in range(rows):
        for n in range(cols):
            for i in range(s):
                for j in range(s):
                    mirrored = (data[m, n, i, s - 1 - j, 0], -data[m, n, i, s - 1 - j, 1])
                    total += (data[m, n, i, j, 0] - mirrored[0]) ** 2 + (data[m, n, i, j, 1] - mirrored[1]) ** 2
    return total


def brute_force_inter(data):
    rows, cols, s, _, _ = data.shape
    total = 0.0
    for m in range(rows):
        for i in range(s):
            for j in range(s):
                for c in range(2):
                    avg = sum(data[m, n, i, j, c] for n in range(cols)) / cols
                    total += sum((data[m, n, i, j, c] - avg) ** 2 for n in range(cols))
    return total


def relative_error(analytic, numeric):
    return np.max(np.abs(analytic - numeric)) / max(1.0, np.max(np.abs(analytic)))


def random_field(rng, max_rows=4, max_cols=6, max_size=4):
    grid = PatchGrid(int(rng.integers(1, max_rows + 1)), int(rng.integers(1, max_cols + 1)),
                     int(rng.integers(1, max_size + 1)))
    return OffsetField(grid, rng.uniform(-3.0, 3.0, size=grid.field_shape))


def test_patch_grid_validation():
    with pytest.raises(UsageError):
        PatchGrid(0, 2, 2)
    with pytest.raises(UsageError):
        PatchGrid(1, 1, 1, clamp_factor=-1.0)
    with pytest.raises(DimensionMismatchError):
        OffsetField(PatchGrid(1, 2, 2), np.zeros((1, 2, 2, 3, 2)))


def test_clamp_offsets():
    grid = PatchGrid(4, 8, 2, clamp_factor=2.0)
    data = np.zeros(grid.field_shape)
    data[0, 0, 0, 0] = (100.0, -100.0)
    data[1, 1, 1, 1] = (3.0, -4.0)
    out = clamp_offsets(OffsetField(grid, data))
    assert tuple(out.data[0, 0, 0, 0]) == (8.0, -16.0)
    assert tuple(out.data[1, 1, 1, 1]) == (3.0, -4.0)

    big = PatchGrid(16, 32, 2, clamp_factor=2.0)
    data = np.zeros(big.field_shape)
    data[0, 0, 0, 0] = (1e6, -1e6)
    assert tuple(clamp_offsets(OffsetField(big, data)).data[0, 0, 0, 0]) == (32.0, -64.0)


def test_mirror_single_entry():
    grid = PatchGrid(1, 1, 2)
    data = np.zeros(grid.field_shape)
    data[0, 0, 0, 0] = (1.0, 2.0)
    mirrored = mirror_offsets(OffsetField(grid, data)).data
    expected = np.zeros(grid.field_shape)
    expected[0, 0, 0, 1] = (1.0, -2.0)
    np.testing.assert_array_equal(mirrored, expected)


def test_mirror_is_an_involution(rng):
    field = random_field(rng)
    np.testing.assert_array_equal(mirror_offsets(mirror_offsets(field)).data, field.data)
    assert intra_loss(mirror_offsets(field)).value == pytest.approx(intra_loss(field).value, rel=1e-12)


def test_intra_loss_hand_example():
    grid = PatchGrid(1, 1, 2)
    data = np.zeros(grid.field_shape)
    data[0, 0, 0, 0] = (1.0, 2.0)
    field = OffsetField(grid, data)
    loss = intra_loss(field)
    assert loss.value == brute_force_intra(data) == 10.0
    fd = finite_difference_grad(intra_loss, field)
    assert relative_error(loss.grad.data, fd) < 1e-6


def test_inter_loss_hand_example():
    grid = PatchGrid(1, 2, 1)
    data = np.zeros(grid.field_shape)
    data[0, 1, 0, 0] = (2.0, 0.0)
    field = OffsetField(grid, data)
    np.testing.assert_array_equal(row_average(field)[0, 0, 0], [1.0, 0.0])
    loss = inter_loss(field)
    assert loss.value == 2.0
    assert relative_error(loss.grad.data, finite_difference_grad(inter_loss, field)) < 1e-6


def test_row_average_examples(rng):
    grid = PatchGrid(2, 2, 1)
    data = np.zeros(grid.field_shape)
    data[1, 1, 0, 0] = (2.0, 4.0)
    np.testing.assert_array_equal(row_average(OffsetField(grid, data))[1, 0, 0], [1.0, 2.0])

    field = random_field(rng)
    expected = np.zeros_like(row_average(field))
    for n in range(field.grid.patch_cols):
        expected = expected + field.data[:, n]
    np.testing.assert_array_equal(row_average(field), expected / field.grid.patch_cols)

    constant = OffsetField(grid, np.full(grid.field_shape, 1.5))
    assert np.all(row_average(constant) == 1.5)


def test_zero_field_has_zero_losses():
    field = OffsetField.zeros(PatchGrid(2, 3, 2))
    for loss_fn in (intra_loss, inter_loss, sdpe_loss):
        loss = loss_fn(field)
        assert loss.value == 0.0
        assert not np.any(loss.grad.data)


def test_invariant_sets_give_exact_zero(rng):
    grid = PatchGrid(3, 4, 3)
    # quarter steps keep every row sum exact
    base = rng.integers(-12, 13, size=grid.field_shape) / 4.0
    symmetric = OffsetField(grid, base)
    symmetric = symmetric.with_data(0.5 * (symmetric.data + mirror_offsets(symmetric).data))
    assert intra_loss(symmetric).value == 0.0

    row_constant = np.broadcast_to(base[:, :1], grid.field_shape).copy()
    assert inter_loss(OffsetField(grid, row_constant)).value == 0.0

    both = OffsetField(grid, np.broadcast_to(symmetric.data[:, :1], grid.field_shape).copy())
    assert sdpe_loss(both).value == 0.0


def test_losses_match_brute_force(rng):
    for _ in range(20):
        field = random_field(rng)
        assert intra_loss(field).value == pytest.approx(brute_force_intra(field.data), rel=1e-12)
        assert inter_loss(field).value == pytest.approx(brute_force_inter(field.data), rel=1e-12, abs=1e-12)


def test_sdpe_loss_is_the_sum_of_both_terms(rng):
    grid = PatchGrid(2, 3, 2)
    field = OffsetField(grid, rng.uniform(-3.0, 3.0, size=grid.field_shape))
    total = sdpe_loss(field)
    assert total.value == intra_loss(field).value + inter_loss(field).value
    np.testing.assert_array_equal(total.grad.data, intra_loss(field).grad.data + inter_loss(field).grad.data)


def test_analytic_gradients_match_finite_differences(rng):
    for _ in range(100):
        field = random_field(rng)
        for loss_fn in (intra_loss, inter_loss, sdpe_loss):
            analytic = loss_fn(field).grad.data
            numeric = finite_difference_grad(loss_fn, field, step=1e-4)
            assert relative_error(analytic, numeric) < 1e-6


def test_normalized_losses_divide_by_element_count(rng):
    field = random_field(rng)
    count = field.data.size
    plain, normalized = sdpe_loss(field), sdpe_loss(field, normalize=True)
    assert normalized.value == pytest.approx(plain.value / count, rel=1e-12)
    np.testing.assert_allclose(normalized.grad.data, plain.grad.data / count, rtol=1e-12)


def test_deformable_sample_zero_offsets_extracts_patches(rng):
    img = ErpImage(rng.random((8, 16, 3)))
    grid = PatchGrid(2, 4, 4)
    patches = deformable_sample(img, grid, OffsetField.zeros(grid))
    assert patches.shape == (2, 4, 4, 4, 3)
    np.testing.assert_array_equal(patches[1, 2], img.data[4:8, 8:12])


def test_deformable_sample_integer_shift_wraps_columns(rng):
    img = ErpImage(rng.random((4, 8)))
    grid = PatchGrid(2, 4, 2)
    data = np.zeros(grid.field_shape)
    data[..., 1] = 1.0
    patches = deformable_sample(img, grid, OffsetField(grid, data))
    shifted = np.roll(img.data, -1, axis=1)
    np.testing.assert_array_equal(patches[0, 3], shifted[0:2, 6:8])
    np.testing.assert_array_equal(patches[1, 3, :, 1], img.data[2:4, 0])


def test_deformable_sample_half_offset_on_ramp():
    ramp = np.tile(np.arange(8, dtype=np.float64), (4, 1))
    grid = PatchGrid(2, 3, 2)
    data = np.zeros(grid.field_shape)
    data[..., 1] = 0.5
    patches = deformable_sample(ErpImage(ramp), grid, OffsetField(grid, data))
    np.testing.assert_allclose(patches[0, 1, 0, :, 0], [2.5, 3.5])


def test_deformable_sample_rejects_oversized_grid(rng):
    grid = PatchGrid(3, 3, 4)
    with pytest.raises(DimensionMismatchError):
        deformable_sample(ErpImage(rng.random((8, 16))), grid, OffsetField.zeros(grid))
