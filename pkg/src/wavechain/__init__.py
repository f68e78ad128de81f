"""Travelling-wave analysis of heterogeneous agent chains on a path graph."""

__version__ = "0.1.0"

from .lti import (Polynomial, RationalTF, StateSpace, TimeSignal, FreqGrid, FreqResponse,
                  poly_eval, tf_eval, count_integrators, tf_to_statespace, assemble_chain_ss,
                  ss_simulate, freq_response, hinf_norm, PoleHit, ImproperTF, DivergenceError)
from .waves import (WaveTF, StabilityReport, FIRKernel, alpha_of, wtf_eval, wtf_dc_gain,
                    check_wtf_stability, ilt_response, wave_fir, apply_fir, dc_limit)
from .boundaries import (BoundaryTFSet, DCGainRecord, BoundaryLocation, soft_btfs, hard_btfs,
                         tl_tr_of, soft_dc_gains, detect_boundaries)
from .chain import (AgentSpec, AbsorberSite, Reference, ChainSpec, SimulationResult,
                    build_chain, simulate, wave_decompose, closed_loop_tf,
                    chain_frequency_solve, local_plateau_estimate, plateau_value,
                    settling_time, relative_l2)
from .absorbers import (AbsorberLaw, StringStabilityVerdict, leader_absorber, rear_absorber,
                        soft_absorber_pair, hard_absorber_pair, closed_form_chain,
                        closed_form_values, string_stability_check)
from .models import agent_m1, agent_m2, m1, m2, two_segment_chain, absorbed_family
