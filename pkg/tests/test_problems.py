import numpy as np
import pytest
import torch

from ngif.errors import ConfigError
from ngif.moments import precompute_table
from ngif.objective import dual_relative, transport_term
from ngif.problems import generate, parse_list, reference_field
from ngif.problems.gigli import GigliConfig, component_means, gen_gigli, gigli_field, gigli_potential
from ngif.problems.tracer import TRACER_DOMAIN, gen_tracer, tracer_field, tracer_stream_function
from ngif.problems.vlasov import (
    BUMP_ON_TAIL, VlasovConfig, electric_energy, energy_series, field_energy, gen_vlasov, leapfrog_step,
    poisson_solve_1d,
)
from ngif.simulate import wrap_periodic
from ngif.testbank import sample_bank
from ngif.utils.rng import stream
from ngif.velocity_model import AnalyticField


def _numerical_gradient(fn, x, h=1e-6):
    grad = np.zeros(2)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        grad[j] = (fn(x + e) - fn(x - e)) / (2 * h)
    return grad


class TestGigli:
    def test_field(self):
        np.testing.assert_allclose(gigli_field(np.array([1.0, 0.0])), [0.0, 1.0])
        np.testing.assert_allclose(gigli_field(np.zeros(2), 2.0), [0.0, 0.0])

    def test_potential_gradient_at_component_means(self):
        config = GigliConfig(components=8, angular_velocity=1.3)
        t = 0.7
        for mean in component_means(config, t):
            grad = _numerical_gradient(lambda y: gigli_potential(y, t, 8, 1.3), mean)
            np.testing.assert_allclose(grad, gigli_field(mean, 1.3), atol=1e-4)
            radial = grad @ mean
            assert abs(radial) <= 1e-4

    def test_potential_small_inside_unit_circle(self, rng):
        angles = rng.uniform(0, 2 * np.pi, size=50)
        x = 0.5 * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        assert np.all(np.abs(gigli_potential(x, 0.3, 8)) <= 0.5 ** 8 / 8 + 1e-15)
        assert gigli_potential(np.zeros(2), 0.0, 8) == 0.0

    def test_degenerate_mixture(self):
        config = GigliConfig(components=1, angular_velocity=0.0, component_std=1e-12, num_samples=50, num_steps=3)
        ds = gen_gigli(config, seed=0)
        np.testing.assert_allclose(ds.samples, np.broadcast_to([1.0, 0.0], ds.samples.shape), atol=1e-10)

    def test_single_component_rotates(self):
        config = GigliConfig(components=1, num_samples=4000, num_steps=8)
        ds = gen_gigli(config, seed=1)
        bound = 5 * config.component_std / np.sqrt(config.num_samples)
        for k, t in enumerate(ds.times):
            np.testing.assert_allclose(ds.samples[k].mean(axis=0), [np.cos(t), np.sin(t)], atol=bound)

    def test_true_field_has_small_weak_loss(self):
        # 成分が1つなら回転対称にならず、モーメントの時間変化がノイズより十分大きい
        config = GigliConfig(components=1, num_samples=50000)
        ds = gen_gigli(config, seed=0)
        bank = sample_bank([1.0], 256, 2, ds.domain, seed=0)
        table = precompute_table(ds, bank, spline_penalty=1e-4)
        field = AnalyticField(lambda x, t: gigli_field(x, config.angular_velocity, xp=torch))
        losses = []
        for k in range(2, ds.num_times - 2):
            parts = np.array_split(ds.samples[k], 10)
            transport = sum(transport_term(field, part, float(ds.times[k]), bank) for part in parts) / len(parts)
            target = torch.as_tensor(table.targets(k))
            losses.append(dual_relative(target, transport).mean().item())
        assert max(losses) <= 0.05

    def test_metadata(self):
        ds = gen_gigli(GigliConfig(num_samples=10, num_steps=2), seed=0)
        assert ds.attrs['problem'] == 'gigli'
        assert ds.samples.shape == (3, 10, 2)


class TestTracer:
    def test_hand_computed_value(self):
        v = tracer_field(np.array([np.pi / 2, 0.0]), 0.0)
        np.testing.assert_allclose(v, [0.3, 0.0], atol=1e-12)

    def test_matches_stream_function(self, rng):
        for _ in range(20):
            x = rng.uniform(0, 2 * np.pi, size=2)
            t = rng.uniform(0, 4)
            grad = _numerical_gradient(lambda y: tracer_stream_function(y, t), x)
            np.testing.assert_allclose(tracer_field(x, t), [grad[1], -grad[0]], atol=1e-8)

    def test_divergence_free(self, rng):
        x = rng.uniform(0, 2 * np.pi, size=(1000, 2))
        t = rng.uniform(0, 4, size=1000)
        h = 1e-5
        div = np.zeros(1000)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            div += (tracer_field(x + e, t)[:, j] - tracer_field(x - e, t)[:, j]) / (2 * h)
        assert np.max(np.abs(div)) <= 1e-6

    def test_periodic(self, rng):
        x = rng.uniform(-10, 10, size=(100, 2))
        for j in range(2):
            shift = np.zeros(2)
            shift[j] = 2 * np.pi
            np.testing.assert_allclose(tracer_field(x + shift, 0.4), tracer_field(x, 0.4), atol=1e-12)
        np.testing.assert_allclose(tracer_field(wrap_periodic(x, TRACER_DOMAIN), 0.4), tracer_field(x, 0.4),
                                   atol=1e-12)

    def test_torch_matches_numpy(self, rng):
        x = rng.uniform(0, 2 * np.pi, size=(10, 2))
        expected = tracer_field(x, 1.1)
        actual = tracer_field(torch.as_tensor(x), 1.1, xp=torch).numpy()
        np.testing.assert_allclose(actual, expected, atol=1e-14)

    def test_single_time_is_initial_gaussian(self):
        ds = gen_tracer(100, [0.0], seed=4)
        x0 = np.pi + stream(4, 'data').standard_normal((100, 2))
        np.testing.assert_allclose(ds.samples[0], wrap_periodic(x0, TRACER_DOMAIN))

    def test_samples_stay_on_torus(self):
        ds = gen_tracer(200, np.linspace(0, 1, 5), seed=0, substeps=5)
        assert ds.samples.shape == (5, 200, 2)
        assert np.all((ds.samples >= 0) & (ds.samples < 2 * np.pi))
        assert ds.domain.is_periodic


class TestPoisson:
    def _cosine_error(self, grid, mu=1.5, length=2 * np.pi):
        x = np.arange(grid) * length / grid
        k = 2 * np.pi / length
        phi, _ = poisson_solve_1d(np.cos(k * x), mu, length)
        return np.max(np.abs(phi - np.cos(k * x) / (mu ** 2 * k ** 2)))

    def test_second_order_convergence(self):
        errors = [self._cosine_error(g) for g in (64, 128, 256)]
        orders = [np.log2(errors[i] / errors[i + 1]) for i in range(2)]
        assert min(orders) >= 1.9
        assert errors[0] < 1e-2

    def test_zero_rhs(self):
        phi, dphi = poisson_solve_1d(np.zeros(32), 1.0, 1.0)
        assert np.all(phi == 0) and np.all(dphi == 0)

    def test_discrete_residual(self, rng):
        mu, length, grid = 1.3, 10.0, 64
        rhs = rng.normal(size=grid)
        rhs -= rhs.mean()
        phi, _ = poisson_solve_1d(rhs, mu, length)
        dx = length / grid
        laplacian = (np.roll(phi, -1) - 2 * phi + np.roll(phi, 1)) / dx ** 2
        assert np.max(np.abs(-mu ** 2 * laplacian - rhs)) <= 1e-10
        assert abs(phi.mean()) <= 1e-12

    def test_linear(self, rng):
        rhs = rng.normal(size=64)
        rhs -= rhs.mean()
        phi, dphi = poisson_solve_1d(rhs, 1.5, 6.0)
        phi3, dphi3 = poisson_solve_1d(3 * rhs, 1.5, 6.0)
        np.testing.assert_allclose(phi3, 3 * phi, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(dphi3, 3 * dphi, rtol=1e-12, atol=1e-12)

    def test_nonzero_mean_is_subtracted(self, caplog):
        phi, _ = poisson_solve_1d(np.ones(16) * 0.5, 1.0, 1.0)
        np.testing.assert_allclose(phi, 0.0, atol=1e-15)
        assert 'subtracting' in caplog.text


class TestElectricEnergy:
    def test_cosine_potential(self):
        mu, length, grid = 1.5, 4 * np.pi, 128
        k = 2 * np.pi / length
        x = np.arange(grid) * length / grid
        energy = field_energy(-k * np.sin(k * x), mu, length)
        assert energy == pytest.approx(0.5 * mu ** 2 * 0.5 * k ** 2 * length, rel=1e-12)

    def test_quadratic_in_potential(self, rng):
        dphi = rng.normal(size=32)
        assert field_energy(3 * dphi, 1.2, 5.0) == pytest.approx(9 * field_energy(dphi, 1.2, 5.0))

    def test_uniform_density_has_no_field(self):
        length, grid = 6.0, 64
        positions = (np.arange(grid * 10) + 0.5) * length / (grid * 10)
        assert electric_energy(positions, 1.5, grid, length) <= 1e-8

    def test_series_from_snapshots(self):
        length, grid = 6.0, 32
        positions = (np.arange(grid * 4) + 0.5) * length / (grid * 4)
        samples = np.stack([np.column_stack([positions, np.zeros_like(positions)])] * 3)
        assert energy_series(samples, 1.5, grid, length).shape == (3,)


class TestVlasov:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            VlasovConfig(grid_size=15)
        with pytest.raises(ValueError):
            VlasovConfig(amplitude=0.2)
        with pytest.raises(ValueError):
            VlasovConfig(instability='landau')
        assert VlasovConfig(debye_length=1.5).length == pytest.approx(6 * np.pi)

    def test_leapfrog_conserves_energy_in_frozen_potential(self):
        # V(x) = 0.1 (1 - cos x), 加速度 -V'(x)
        def accel(x):
            return -0.1 * np.sin(x)

        x, v = np.array([1.0]), np.array([0.3])
        a = accel(x)
        initial = 0.5 * v[0] ** 2 + 0.1 * (1 - np.cos(x[0]))
        for _ in range(10000):
            x, v, a = leapfrog_step(x, v, a, 0.01, accel, 2 * np.pi)
        final = 0.5 * v[0] ** 2 + 0.1 * (1 - np.cos(x[0]))
        assert abs(final - initial) <= 1e-4

    def test_particle_count_and_box(self):
        config = VlasovConfig(num_particles=2000, grid_size=32, t_end=2.0, num_steps=4)
        ds = gen_vlasov(config, seed=0)
        assert ds.samples.shape == (5, 2000, 2)
        assert np.all((ds.samples[..., 0] >= 0) & (ds.samples[..., 0] < config.length))
        assert ds.scenario_param == 1.5
        assert ds.attrs['box_length'] == pytest.approx(config.length)

    def test_two_stream_growth(self):
        config = VlasovConfig(num_particles=20000, grid_size=64, t_end=30.0, num_steps=60)
        ds = gen_vlasov(config, seed=0)
        energy = energy_series(ds.samples, config.debye_length, config.grid_size, config.length)
        low = energy[:np.argmax(energy) + 1].min()
        assert energy.max() >= 1e2 * low

    def test_bump_on_tail_velocities(self):
        config = VlasovConfig(instability=BUMP_ON_TAIL, num_particles=20000, grid_size=32, num_steps=0)
        v = gen_vlasov(config, seed=2).samples[0, :, 1]
        # 約 10% が 3 sigma 付近のバンプ
        assert 0.08 <= np.mean(v > 0.45) <= 0.12


class TestRegistry:
    def test_vlasov_yields_one_dataset_per_debye_length(self):
        params = {'debye_lengths': '1.5, 1.6', 'num_particles': 500, 'grid_size': 16, 'num_steps': 2,
                  'mode': 1, 't_end': 0.4}
        datasets = generate('vlasov', params, seed=0)
        assert [ds.scenario_param for ds in datasets] == [1.5, 1.6]
        assert reference_field(datasets[0]) is None

    def test_missing_key(self):
        with pytest.raises(ConfigError) as e:
            generate('tracer', {'num_samples': 10}, seed=0)
        assert 'problem.' in str(e.value)

    def test_unknown_problem(self):
        with pytest.raises(ConfigError):
            generate('landau', {}, seed=0)

    def test_reference_fields(self):
        ds = generate('gigli', {'components': 4, 'angular_velocity': 2.0, 'component_std': 0.1,
                                'num_samples': 20, 'num_steps': 2, 't_end': 1.0})[0]
        np.testing.assert_allclose(reference_field(ds)(np.array([[1.0, 0.0]]), 0.0), [[0.0, 2.0]])
        tracer = gen_tracer(5, [0.0, 0.1], substeps=2)
        x = np.array([[1.0, 2.0]])
        np.testing.assert_allclose(reference_field(tracer)(x, 0.3), tracer_field(x, 0.3))

    def test_parse_list(self):
        assert parse_list('1.2, 1.3,') == [1.2, 1.3]
        assert parse_list(1.5) == [1.5]
        with pytest.raises(ConfigError):
            parse_list('1.2,abc')
