"""Bohmian trajectories and probability accounting for the free Klein-Gordon current."""
from .geometry import FoliationField, FourVector, Hypersurface, Patch, minkowski_dot, surface_measure
from .wavefunction import (PlaneWaveMode, WaveFunction, conventional_norm, kg_inner_product, make_two_mode,
                           random_box_state)
from .current import CurrentField, NParticleCurrent, NParticleWaveFunction, two_mode_current
from .trajectories import IntegratorConfig, Trajectory, crossings, integrate, integrate_many, integrate_n_particle
from .congruence import Congruence, CrossingReport, complete_surface, crossing_report, launch
from .interference import (BeamProfile, TwoFrequencyScenario, alpha, conventional_density, deviation_map,
                           kg_density, time_average)

__version__ = "0.1.0"
