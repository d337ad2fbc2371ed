"""Job functions executed inline or by Django-Q workers.

Arguments and return values are plain JSON-ready dicts so they travel through
the broker unchanged and land directly in results files.
"""

from __future__ import annotations

import logging

from annealing.exceptions import InvalidInputError, LabError
from annealing.services.bitstrings import BasisState
from annealing.services.evolve import (
    Schedule,
    converged_run,
    make_anneal_spec,
    make_reverse_spec,
    sample,
)
from annealing.services.ising import map_2sat, rescale
from annealing.services.metrics import tts_result
from annealing.services.problem_io import fixture_ground_states, fixture_labels, fixture_problem, problem_from_json
from annealing.services.sat2 import TwoSatProblem, enumerate_solutions

logger = logging.getLogger(__name__)


def default_targets(problem: TwoSatProblem) -> list[BasisState]:
    """All solutions; bundled problems keep the order their reference tables use."""
    solutions = enumerate_solutions(problem)
    if not solutions:
        raise InvalidInputError(f"Problem {problem.label} is unsatisfiable; pass explicit targets.")
    if problem.label in fixture_labels() and set(fixture_problem(problem.label).clauses) == set(problem.clauses):
        ordered = fixture_ground_states(problem.label)
        if set(ordered) == set(solutions):
            return ordered
    return solutions


def _targets(problem: TwoSatProblem, bitstrings) -> list[BasisState]:
    if not bitstrings:
        return default_targets(problem)
    return [BasisState.from_string(b) for b in bitstrings]


def _schedule(path) -> Schedule:
    return Schedule.from_csv(path) if path else Schedule.linear()


def _sampling_entry(problem, spec, targets, params) -> dict:
    if params.get('converge', True):
        outcome = converged_run(spec, targets, params.get('tol'), params.get('max_halvings'))
        sampling = outcome.to_json_dict()
        if not outcome.converged:
            logger.warning("Problem %s at T_A=%s did not pass the convergence gate.", problem.label, params['T_A'])
    else:
        sampling = sample(spec, targets).to_json_dict()
    ramp = params['T_A'] if spec.protocol == 'standard' else spec.total_duration
    return {
        'problem': problem.label,
        'n_vars': problem.n_vars,
        'alpha': params.get('alpha', 1.0),
        'parameters': spec.describe(),
        'sampling': sampling,
        'tts': tts_result(min(1.0, sampling['total_success']), ramp, params.get('p_target', 0.99)).to_json_dict(),
    }


def anneal_job(params: dict) -> dict:
    problem = problem_from_json(params['problem'])
    model = map_2sat(problem)
    if params.get('alpha', 1.0) != 1.0:
        model = rescale(model, params['alpha'])
    targets = _targets(problem, params.get('targets'))
    spec = make_anneal_spec(
        model=model,
        schedule=_schedule(params.get('schedule')),
        T_A=params['T_A'],
        **({'tau': min(params['tau'], params['T_A'])} if params.get('tau') else {}),
    )
    logger.info("Standard anneal of %s at T_A=%s", problem.label, params['T_A'])
    return _sampling_entry(problem, spec, targets, params)


def reverse_job(params: dict) -> dict:
    problem = problem_from_json(params['problem'])
    model = map_2sat(problem)
    if params.get('alpha', 1.0) != 1.0:
        model = rescale(model, params['alpha'])
    targets = _targets(problem, params.get('targets'))
    initial = BasisState.from_string(params['init'])
    if initial not in targets:
        logger.warning("Initial state %s of %s is not one of the target solutions.", initial, problem.label)
    base = make_anneal_spec(
        model=model,
        schedule=_schedule(params.get('schedule')),
        T_A=params['T_A'],
        **({'tau': min(params['tau'], params['T_A'])} if params.get('tau') else {}),
    )
    spec = make_reverse_spec(base=base, s_r=params['s_r'], T_W=params.get('T_W', 0.0), initial=initial)
    logger.info("Reverse anneal of %s from %s (s_r=%s, T_A=%s, T_W=%s)",
                problem.label, initial, spec.s_r, base.T_A, spec.T_W)
    return _sampling_entry(problem, spec, targets, params)


def run_queued_anneal(run_id: str) -> None:
    """Worker entry point for anneals queued through the REST API."""
    from annealing.models import Run
    from annealing.services.manifest import RunDirectory, RunManifest

    run = Run.objects.get(pk=run_id)
    run.mark_running()
    try:
        manifest = RunManifest.model_validate(run.manifest)
        entry = anneal_job(manifest.parameters)
        directory = RunDirectory(manifest)
        directory.write_results([entry])
        run.mark_complete({'results': [entry]}, directory.path)
        logger.info("Queued anneal %s complete.", run_id)
    except LabError as e:
        logger.warning("Queued anneal %s failed: %s", run_id, e)
        run.mark_failed(str(e))
    except Exception as e:
        logger.exception("Queued anneal %s crashed.", run_id)
        run.mark_failed(f"Unexpected error: {e}")
