"""
Command-line driver of the reconstruction pipeline.

    simulate     manifest (+ source images) -> dataset directory
    reconstruct  dataset directory -> estimate, amplitude/phase images, trace.csv
    check-grad   finite-difference check of the analytical gradient
    overlap      Fourier sampling redundancy map and the analytical step size
    tune-step    manual step-size search around the analytical step
    version      prints the package version

Exit codes: 0 success, 1 check or numerical failure, 2 invalid argument,
configuration or validation error, 3 I/O error.
"""
import argparse
import logging
import sys

from typing import List, Optional, Sequence

from fpm_processing import __version__
from fpm_processing.processor_app.check_grad import GradientChecker
from fpm_processing.processor_app.overlap import OverlapInspector
from fpm_processing.processor_app.reconstruct import Reconstructor
from fpm_processing.processor_app.simulate import DatasetSimulator
from fpm_processing.processor_app.tune_step import StepSizeTuner
from fpm_processing.settings import configure_logging
from fpm_processing.src.exceptions import (
    EXIT_CHECK_FAILED,
    EXIT_INVALID,
    EXIT_IO,
    EXIT_OK,
    CheckFailed,
    FPMError,
)


logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """
    Reports usage errors with the invalid-argument exit code.
    """

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f'{self.prog}: error: {message}\n')


def _positive_float(value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f'{value!r} is not a number') from None

    if not number > 0:
        raise argparse.ArgumentTypeError(f'expected a positive number, got {value}')

    return number


def _non_negative_float(value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f'{value!r} is not a number') from None

    if not number >= 0:
        raise argparse.ArgumentTypeError(f'expected a non-negative number, got {value}')

    return number


def _positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f'{value!r} is not an integer') from None

    if number < 1:
        raise argparse.ArgumentTypeError(f'expected a positive integer, got {value}')

    return number


def _non_negative_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f'{value!r} is not an integer') from None

    if number < 0:
        raise argparse.ArgumentTypeError(f'expected a non-negative integer, got {value}')

    return number


def _multipliers(value: str) -> List[float]:
    return [_positive_float(part.strip()) for part in value.split(',') if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='fpm', description='Fourier ptychographic reconstruction pipeline.')
    commands = parser.add_subparsers(dest='command', required=True, parser_class=_ArgumentParser)

    simulate = commands.add_parser('simulate', help='simulate a measurement dataset')
    simulate.add_argument('--manifest', required=True, help='input manifest (the plan may be omitted)')
    simulate.add_argument('--amplitude', help='FPMR amplitude source image (ellipses pattern if omitted)')
    simulate.add_argument('--phase', help='FPMR phase source image (ellipses pattern if omitted)')
    simulate.add_argument('--out', required=True, help='output dataset directory')
    simulate.add_argument('--seed', type=_non_negative_int, help='overrides the manifest seed')
    simulate.add_argument('--noise-sigma', type=_non_negative_float, help='Gaussian intensity noise level')

    reconstruct = commands.add_parser('reconstruct', help='reconstruct a dataset with WF or AWF')
    reconstruct.add_argument('--dataset', required=True)
    reconstruct.add_argument('--algorithm', choices=['wf', 'awf'], default='wf')
    reconstruct.add_argument('--iters', type=_positive_int, default=500)
    reconstruct.add_argument('--step', type=_positive_float, help='step size (default 1 / overlap max)')
    reconstruct.add_argument('--grad-tol', type=_non_negative_float, default=0.0)
    reconstruct.add_argument('--momentum', choices=['nesterov', 'linear', 'none'], default='nesterov')
    reconstruct.add_argument('--init-amplitude', type=_non_negative_float, default=1.0)
    reconstruct.add_argument('--init-phase', type=float, default=0.0)
    reconstruct.add_argument('--out', required=True)

    check_grad = commands.add_parser('check-grad', help='finite-difference gradient check')
    check_grad.add_argument('--dataset', required=True)
    check_grad.add_argument('--seed', type=_non_negative_int, default=0)
    check_grad.add_argument('--h', type=_positive_float, default=1e-6)
    check_grad.add_argument('--at', choices=['random', 'truth'], default='random')

    overlap = commands.add_parser('overlap', help='write the overlap map and print the step size')
    overlap.add_argument('--dataset', required=True)
    overlap.add_argument('--out', required=True)

    tune = commands.add_parser('tune-step', help='search step sizes around the analytical one')
    tune.add_argument('--dataset', required=True)
    tune.add_argument('--iters', type=_positive_int, default=50)
    tune.add_argument('--multipliers', type=_multipliers, default=[0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
    tune.add_argument('--out', help='CSV file of every candidate')

    commands.add_parser('version', help='print the package version')

    return parser


def cmd_simulate(args: argparse.Namespace) -> int:
    summary = DatasetSimulator(
        manifest_path=args.manifest,
        out_dir=args.out,
        amplitude_path=args.amplitude,
        phase_path=args.phase,
        seed=args.seed,
        noise_sigma=args.noise_sigma,
    ).summary

    manifest = summary.manifest

    print(
        f'simulated {summary.num_measurements} measurements '
        f'({manifest.plan_kind.value}, {len(manifest.plan.leds)} LEDs, '
        f'n={manifest.n1}x{manifest.n2}, m={manifest.m1}x{manifest.m2}, '
        f'seed={manifest.seed}, noise={manifest.noise_model.value}:{manifest.noise_sigma}) '
        f'into {args.out}'
    )

    return EXIT_OK


def cmd_reconstruct(args: argparse.Namespace) -> int:
    summary = Reconstructor(
        dataset_dir=args.dataset,
        out_dir=args.out,
        algorithm=args.algorithm,
        iters=args.iters,
        step=args.step,
        grad_tol=args.grad_tol,
        momentum=args.momentum,
        init_amplitude=args.init_amplitude,
        init_phase=args.init_phase,
    ).summary

    line = (
        f'algorithm={summary.algorithm.value} iterations={summary.iterations_run} '
        f'final_cost={summary.final_cost:.17g} final_grad_norm={summary.final_grad_norm:.17g} '
        f'mu={summary.step_size:.17g} max_iters={summary.max_iters} momentum={summary.momentum.value} '
        f'grad_tol={summary.grad_tol:.17g} init_amplitude={summary.init_amplitude:.17g} '
        f'init_phase={summary.init_phase:.17g}'
    )

    if summary.error_full is not None:
        line += f' rel_error={summary.error_full:.6e} rel_error_covered={summary.error_covered:.6e}'

    print(line)

    return EXIT_OK


def cmd_check_grad(args: argparse.Namespace) -> int:
    report = GradientChecker(dataset_dir=args.dataset, seed=args.seed, h=args.h, at=args.at).report

    print(
        f'{"PASS" if report.passed else "FAIL"} max_rel_error={report.max_error:.6e} '
        f'tolerance={report.tolerance:g} grad_norm={report.gradient_norm:.6e} '
        f'coordinates={len(report.coordinates) // 2}'
    )

    if not report.passed:
        r, c, part = report.worst_coordinate
        raise CheckFailed(f'gradient mismatch at ({r}, {c}) {part} part: error {report.max_error:.6e}')

    return EXIT_OK


def cmd_overlap(args: argparse.Namespace) -> int:
    inspector = OverlapInspector(dataset_dir=args.dataset, out_path=args.out)

    print(f'max_value={inspector.overlap.max_value:.17g} mu={inspector.step_size:.17g}')

    return EXIT_OK


def cmd_tune_step(args: argparse.Namespace) -> int:
    result = StepSizeTuner(
        dataset_dir=args.dataset,
        iters=args.iters,
        multipliers=args.multipliers,
        out_path=args.out,
    ).result

    for candidate in result.candidates:
        print(
            f'multiplier={candidate.multiplier:g} step={candidate.step:.17g} '
            f'final_cost={candidate.final_cost:.17g} monotone={candidate.monotone}'
        )

    print(f'analytic_mu={result.analytic_step:.17g} best_mu={result.best_step:.17g}')

    return EXIT_OK


def cmd_version(args: argparse.Namespace) -> int:
    print(__version__)

    return EXIT_OK


COMMANDS = {
    'simulate': cmd_simulate,
    'reconstruct': cmd_reconstruct,
    'check-grad': cmd_check_grad,
    'overlap': cmd_overlap,
    'tune-step': cmd_tune_step,
    'version': cmd_version,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Runs one subcommand and returns its exit code.
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID

    try:
        return COMMANDS[args.command](args)
    except CheckFailed as exc:
        logger.error(str(exc))
        return EXIT_CHECK_FAILED
    except FPMError as exc:
        logger.error(f'{type(exc).__name__}: {exc}')
        return exc.exit_code
    except OSError as exc:
        logger.error(f'I/O error: {exc}')
        return EXIT_IO
    except ValueError as exc:
        logger.error(f'invalid argument: {exc}')
        return EXIT_INVALID


if __name__ == '__main__':
    configure_logging()

    sys.exit(main())
