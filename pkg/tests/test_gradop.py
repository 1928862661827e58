# -*- coding: utf-8 -*-
"""
Тесты градиентных операторов, модуля TP и изображений следов
"""

import numpy as np
import pytest
from PIL import Image

from errors import ConfigError, ShapeError
from models import KernelName, PaddingMode, TPConfig, TPMode
from oracles import conv2d_loop
from gradop import (FixedKernelConv, build_tp, get_kernel, kernel_registry, kernel_weights, tp_apply,
                    trace_energy_ratio, trace_image, trace_response)
from tensor_core import ParamStore, Tensor, float64_mode

PREWITT_D = [[0, 1, 1], [-1, 0, 1], [-1, -1, 0]]


class TestRegistry:
    """Реестр операторов"""

    def test_has_nine_operators(self):
        assert set(kernel_registry()) == set(KernelName)
        assert len(kernel_registry()) == 9

    def test_registry_is_read_only(self):
        with pytest.raises(TypeError):
            kernel_registry()[KernelName.HIGHPASS] = None

    def test_prewitt_diagonal_coefficients(self):
        np.testing.assert_array_equal(get_kernel("prewitt-d").arrays()[0], PREWITT_D)

    @pytest.mark.parametrize("name", list(KernelName))
    def test_all_kernels_are_zero_sum(self, name):
        assert get_kernel(name).zero_sum

    def test_sobel_v_is_transpose_of_h(self):
        h = get_kernel(KernelName.SOBEL_H).arrays()[0]
        v = get_kernel(KernelName.SOBEL_V).arrays()[0]
        np.testing.assert_array_equal(v, h.T)

    def test_only_roberts_is_nonlinear(self):
        nonlinear = [k.name for k in kernel_registry().values() if not k.is_linear]
        assert nonlinear == [KernelName.ROBERTS_SHARPEN]

    def test_unknown_operator(self):
        with pytest.raises(ConfigError, match="prewitt-d"):
            get_kernel("canny")

    def test_arrays_are_copies(self):
        kernel = get_kernel(KernelName.LAPLACIAN)
        kernel.arrays()[0][1, 1] = 100
        assert kernel.arrays()[0][1, 1] == -4


class TestFixedKernelConv:
    """Свёртка фиксированным ядром"""

    def test_weight_shapes(self):
        kernel = get_kernel(KernelName.SOBEL_H)
        assert kernel_weights(kernel, 5, TPMode.DEPTHWISE)[0].shape == (5, 1, 3, 3)
        assert kernel_weights(kernel, 5, TPMode.SUMMED_SINGLE)[0].shape == (1, 5, 3, 3)

    def test_depthwise_matches_loop(self, rng):
        x = rng.normal(size=(2, 3, 6, 6))
        with float64_mode():
            out = FixedKernelConv(KernelName.PREWITT_D, 3)(Tensor(x))
        weights = np.tile(np.array(PREWITT_D, dtype=float), (3, 1, 1, 1))
        expected = conv2d_loop(x, weights, pad=1, kind="replicate", groups=3)
        assert out.shape == x.shape
        np.testing.assert_allclose(out.data, expected, atol=1e-10)

    def test_summed_single_is_channel_sum(self, rng):
        x = rng.normal(size=(1, 3, 5, 5))
        with float64_mode():
            summed = FixedKernelConv(KernelName.SOBEL_H, 3, TPMode.SUMMED_SINGLE)(Tensor(x))
            depthwise = FixedKernelConv(KernelName.SOBEL_H, 3)(Tensor(x))
        assert summed.shape == (1, 1, 5, 5)
        np.testing.assert_allclose(summed.data[:, 0], depthwise.data.sum(axis=1), atol=1e-10)

    def test_constant_input_gives_zero(self):
        """Сумма коэффициентов 0 + replicate-паддинг: постоянный вход -> нулевой отклик"""
        for name in KernelName:
            out = FixedKernelConv(name, 3)(Tensor(np.full((1, 3, 6, 6), 0.7)))
            np.testing.assert_allclose(out.data, 0, atol=1e-5)

    def test_roberts_combines_absolute_responses(self, rng):
        x = rng.normal(size=(1, 2, 5, 5))
        with float64_mode():
            out = FixedKernelConv(KernelName.ROBERTS_SHARPEN, 2)(Tensor(x))
        gx, gy = get_kernel(KernelName.ROBERTS_SHARPEN).arrays()
        ax = conv2d_loop(x, np.tile(gx, (2, 1, 1, 1)), pad=1, kind="replicate", groups=2)
        ay = conv2d_loop(x, np.tile(gy, (2, 1, 1, 1)), pad=1, kind="replicate", groups=2)
        np.testing.assert_allclose(out.data, np.abs(ax) + np.abs(ay), atol=1e-10)

    def test_registers_fixed_entries(self):
        store = ParamStore()
        FixedKernelConv(KernelName.ROBERTS_SHARPEN, 4, store=store, prefix="stream1.tp")
        assert store.entry("stream1.tp.kernel").kind == "fixed"
        assert "stream1.tp.kernel_y" in store
        assert store.count("param") == 0
        assert store.trainable() == []

    def test_gradient_flows_to_input_only(self, rng):
        store = ParamStore()
        conv = FixedKernelConv(KernelName.PREWITT_D, 2, store=store)
        x = Tensor(rng.normal(size=(1, 2, 4, 4)), requires_grad=True)
        conv(x).sum().backward()
        assert x.grad is not None
        assert store["tp.kernel"].grad is None

    def test_channel_mismatch(self, rng):
        conv = FixedKernelConv(KernelName.PREWITT_D, 3)
        with pytest.raises(ShapeError, match="prewitt-d"):
            conv(Tensor(rng.normal(size=(1, 4, 5, 5))))

    def test_reference_weights_match_registered(self):
        store = ParamStore()
        conv = FixedKernelConv(KernelName.KIRSCH, 3, store=store)
        np.testing.assert_array_equal(store["tp.kernel"].data, conv.reference_weights()[0])


class TestTP:
    """Модуль TP"""

    def test_tp_apply_default_is_prewitt_depthwise(self, rng):
        x = rng.normal(size=(1, 3, 5, 5))
        with float64_mode():
            out = tp_apply(Tensor(x))
            expected = FixedKernelConv(KernelName.PREWITT_D, 3)(Tensor(x))
        np.testing.assert_array_equal(out.data, expected.data)

    def test_tp_zero_padding_differs_at_border(self, rng):
        x = Tensor(rng.uniform(size=(1, 3, 6, 6)))
        zero = tp_apply(x, TPConfig(padding=PaddingMode.zero(1)))
        rep = tp_apply(x, TPConfig(padding=PaddingMode.replicate(1)))
        np.testing.assert_allclose(zero.data[:, :, 1:-1, 1:-1], rep.data[:, :, 1:-1, 1:-1], atol=1e-6)
        assert not np.allclose(zero.data[:, :, 0], rep.data[:, :, 0])

    def test_build_tp_uses_config(self):
        store = ParamStore()
        tp = build_tp(TPConfig(operator="laplacian", mode="summed-single"), 3, store, "s.tp")
        assert tp.out_channels == 1
        assert store["s.tp.kernel"].shape == (1, 3, 3, 3)

    def test_rank_check(self):
        with pytest.raises(ShapeError):
            tp_apply(Tensor(np.zeros((3, 5, 5))))


class TestTraceImage:
    """Изображения следов"""

    def test_constant_image_is_black(self):
        image = Image.new("RGB", (12, 10), (90, 120, 200))
        trace = trace_image(image)
        assert trace.size == (12, 10)
        assert np.asarray(trace).max() == 0

    def test_full_range_for_edge(self):
        array = np.zeros((8, 8, 3))
        array[:, 4:] = 1.0
        pixels = np.asarray(trace_image(array, KernelName.SOBEL_H))
        assert pixels.dtype == np.uint8
        assert pixels.min() == 0 and pixels.max() == 255

    def test_response_is_non_negative(self, rng):
        response = trace_response(rng.uniform(size=(6, 7, 3)), KernelName.HIGHPASS)
        assert response.shape == (3, 6, 7)
        assert response.min() >= 0

    def test_rejects_wrong_shape(self):
        with pytest.raises(ShapeError):
            trace_response(np.zeros((4, 4, 4)))

    def test_energy_ratio(self):
        response = np.zeros((3, 4, 4))
        response[:, 0, 0] = 6.0
        response[:, 3, 3] = 1.0
        artifact = np.zeros((4, 4), dtype=bool)
        artifact[0, 0] = True
        clean = np.zeros((4, 4), dtype=bool)
        clean[3, 3] = True
        assert trace_energy_ratio(response, artifact, clean) == pytest.approx(6.0)

    def test_energy_ratio_empty_mask(self):
        with pytest.raises(ConfigError):
            trace_energy_ratio(np.ones((3, 2, 2)), np.zeros((2, 2), bool), np.ones((2, 2), bool))


class TestOperatorProperties:
    """Линейность, независимость каналов, избирательность по направлению"""

    def test_ramp_interior_value(self):
        """f(x, y) = x, PrewittH: во внутренних пикселях 3 * ((x + 1) - (x - 1)) = 6"""
        ramp = np.broadcast_to(np.arange(8, dtype=float), (1, 3, 8, 8))
        out = tp_apply(Tensor(ramp), TPConfig(operator=KernelName.PREWITT_H))
        np.testing.assert_allclose(out.data[:, :, 1:-1, 1:-1], 6.0)

    def test_linearity(self, rng):
        x, y = rng.normal(size=(2, 1, 3, 6, 6))
        out = tp_apply(Tensor(2.0 * x - 0.5 * y)).data
        np.testing.assert_allclose(out, 2.0 * tp_apply(Tensor(x)).data - 0.5 * tp_apply(Tensor(y)).data, atol=1e-5)

    def test_depthwise_channel_independence(self, rng):
        x = rng.normal(size=(1, 3, 6, 6))
        base = tp_apply(Tensor(x)).data
        x[0, 1] += rng.normal(size=(6, 6))
        changed = tp_apply(Tensor(x)).data
        np.testing.assert_array_equal(base[:, [0, 2]], changed[:, [0, 2]])
        assert not np.allclose(base[:, 1], changed[:, 1])

    def test_direction_selectivity(self):
        vertical_ramp = np.broadcast_to(np.arange(7, dtype=float)[:, None], (1, 3, 7, 7))
        horizontal = tp_apply(Tensor(vertical_ramp), TPConfig(operator=KernelName.PREWITT_H))
        np.testing.assert_allclose(horizontal.data, 0, atol=1e-6)
        transposed = np.ascontiguousarray(vertical_ramp.transpose(0, 1, 3, 2))
        vertical = tp_apply(Tensor(transposed), TPConfig(operator=KernelName.PREWITT_V))
        np.testing.assert_allclose(vertical.data, 0, atol=1e-6)

    def test_vertical_edge_gives_bright_column(self):
        array = np.zeros((8, 8, 3))
        array[:, 4:] = 1.0
        pixels = np.asarray(trace_image(array, KernelName.PREWITT_H))
        assert pixels[:, 3:5].min() == 255
        assert pixels[:, :2].max() == 0 and pixels[:, 6:].max() == 0

    def test_depthwise_fuzz_against_loop(self):
        rng = np.random.default_rng(99)
        names = list(KernelName)
        for _ in range(100):
            name = names[int(rng.integers(len(names)))]
            c = int(rng.integers(1, 4))
            x = rng.normal(size=(int(rng.integers(1, 3)), c, int(rng.integers(3, 7)), int(rng.integers(3, 7))))
            with float64_mode():
                out = FixedKernelConv(name, c)(Tensor(x))
            responses = [conv2d_loop(x, np.tile(grid, (c, 1, 1, 1)), pad=1, kind="replicate", groups=c)
                         for grid in get_kernel(name).arrays()]
            expected = responses[0] if len(responses) == 1 else np.abs(responses[0]) + np.abs(responses[1])
            np.testing.assert_allclose(out.data, expected, atol=1e-6)
