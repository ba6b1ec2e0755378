import os
import sys
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import requests

from .DistillPipeline import run_divspa, run_ablation, ABLATION_ROWS
from .Evaluation import evaluate, dump_ranks
from .Report import (
    DatasetInfo, augmentation_rows, summarize_augmentations, run_report_dict, run_report_text,
    ablation_report, compare_report,
)
from .RunConfig import RunConfig
from .lib.costants import APP_NAME, OUTPUT_FILES, THREADS_ENV
from .lib.json_config import set_json_config
from .lib.kv_config import normalize_key
from .lib.utils import format_table, get_file_hash, make_option
from .models.Augmentation import ALL_SOURCES, CandidateSource, dump_augmentations
from .models.Checkpoint import load_checkpoint
from .models.RetrievalIndex import dump_topk
from .models.Models import (
    ConfigError, DataError, TrainingError, EmptyEvaluation, DownloadInterruptedException, InternalError,
)
from .providers.providers_list import interaction_provider, movielens_provider

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAINING = 4
EXIT_DOWNLOAD = 5


class Cli():
    options = [
        make_option('run', description='Train the base model and DivSPA, evaluate both and write the report',
                    arg_description='<config> [--<key> <value>...]'),
        make_option('ablate', description='Run DivSPA with augmentation sources disabled (w/o u2i, i2i, u2u2i, all)',
                    arg_description='<config> [--drop u2i,i2i,u2u2i]'),
        make_option('evaluate', description='Evaluate a checkpoint on the test split of a dataset',
                    arg_description='<config> --checkpoint <file.npz> [--json <file>]'),
        make_option('inspect-aug', description='Summarize an augmentation dump: per-source counts, weights, distinct items',
                    arg_description='<augmentations.tsv>'),
        make_option('compare', description='Repeat run over several seeds and report DivSPA - Base deltas',
                    arg_description='<config> [--seeds 1,2,3]'),
        make_option('fetch-movielens', description='Download MovieLens-100K and convert it to the ingestion TSV',
                    arg_description='<dest.tsv>'),
    ]

    @staticmethod
    def from_options(argv: List[str]) -> int:
        if len(argv) < 2 or argv[1] in ('--help', '-h', 'help'):
            Cli._print_usage()
            return EXIT_OK if len(argv) >= 2 else EXIT_CONFIG

        opt = Cli._get_invoked_option(argv)

        if not opt:
            print(f'Error: unknown command "{argv[1]}", see --help', file=sys.stderr)
            return EXIT_CONFIG

        name = str(opt.long_name).replace('-', '_')

        try:
            return getattr(Cli, name)(argv)
        except ConfigError as e:
            return Cli._fail(e, EXIT_CONFIG)
        except (DataError, OSError) as e:
            return Cli._fail(e, EXIT_DATA)
        except (TrainingError, EmptyEvaluation) as e:
            return Cli._fail(e, EXIT_TRAINING)
        except (DownloadInterruptedException, requests.RequestException) as e:
            return Cli._fail(e, EXIT_DOWNLOAD)
        except InternalError as e:
            return Cli._fail(e, EXIT_TRAINING)

    # ---- subcommands

    @staticmethod
    def run(argv) -> int:
        if Cli._print_help_if_requested(argv, Cli._config_help(), text='Usage: run <config> [--<key> <value>...]'):
            return EXIT_OK

        positionals, flags = Cli._parse_args(argv[2:], value_flags=RunConfig.keys())
        config = Cli._load_config(positionals, flags)
        out = Cli._prepare_output_dir(config)

        ds, train, test, split = Cli._load_split(config)
        pcfg = config.pipeline_config()

        _, _, report = run_divspa(train, test, pcfg, np.random.default_rng(config.seed), checkpoint_dir=out)

        dump_augmentations(os.path.join(out, OUTPUT_FILES['augmentations']), report.augmentations, train)
        augmentation = summarize_augmentations(augmentation_rows(report.augmentations))

        if config.dump_ranks:
            for label, metrics in (('base', report.base), ('divspa', report.divspa)):
                dump_ranks(os.path.join(out, OUTPUT_FILES['ranks'].format(label)), test, metrics.ranks)
                dump_topk(os.path.join(out, OUTPUT_FILES['topk'].format(label)),
                          [(ds.user_ids[u], ranked) for u, ranked in sorted(metrics.topk.items())])

        info = DatasetInfo.of(ds, get_file_hash(config.dataset))
        text = run_report_text(info, split, config.as_dict(), report.base, report.divspa, report.control, augmentation)
        data = run_report_dict(info, split, config.as_dict(), report.base, report.divspa, report.control,
                               report.loss_curves, augmentation)

        set_json_config(os.path.join(out, OUTPUT_FILES['report_json']), data)
        Cli._write_text(os.path.join(out, OUTPUT_FILES['report']), text)

        print(text)
        print(f'Report written to {out}')
        return EXIT_OK

    @staticmethod
    def ablate(argv) -> int:
        if Cli._print_help_if_requested(argv, [
            ['--drop <sources>', 'Comma-separated subset of u2i,i2i,u2u2i to disable; without it the full sweep runs'],
            *Cli._config_help(),
        ], text='Usage: ablate <config> [--drop u2i,i2i,u2u2i]'):
            return EXIT_OK

        positionals, flags = Cli._parse_args(argv[2:], value_flags=[*RunConfig.keys(), 'drop'])
        drop = flags.pop('drop', None)
        config = Cli._load_config(positionals, flags)
        out = Cli._prepare_output_dir(config)

        ds, train, test, split = Cli._load_split(config)
        pcfg = config.pipeline_config()

        drops = ABLATION_ROWS
        if drop is not None:
            dropped = Cli._parse_sources(drop)
            drops = [('DivSPA', ()), (Cli._ablation_label(dropped), dropped)]

        base, rows = run_ablation(train, test, pcfg, np.random.default_rng(config.seed), drops=drops)

        if drop is not None:
            _, _, augmented = rows[-1]
            dump_augmentations(os.path.join(out, OUTPUT_FILES['augmentations']), augmented, train)

        text, data = ablation_report(base, [(label, m) for label, m, _ in rows])
        set_json_config(os.path.join(out, OUTPUT_FILES['ablation_json']), data)
        Cli._write_text(os.path.join(out, OUTPUT_FILES['ablation']), text)

        print(text)
        return EXIT_OK

    @staticmethod
    def evaluate(argv) -> int:
        if Cli._print_help_if_requested(argv, [
            ['--checkpoint <file>', 'Checkpoint written by run (phase1.npz or phase2.npz)'],
            ['--json <file>', 'Also write the metrics as JSON'],
        ], text='Usage: evaluate <config> --checkpoint <file.npz>'):
            return EXIT_OK

        positionals, flags = Cli._parse_args(argv[2:], value_flags=[*RunConfig.keys(), 'checkpoint', 'json'])
        checkpoint = flags.pop('checkpoint', None)
        json_out = flags.pop('json', None)

        if not checkpoint:
            raise ConfigError('<cli>:0: --checkpoint is required')

        config = Cli._load_config(positionals, flags)
        params, hp = load_checkpoint(checkpoint)

        _, train, test, _ = Cli._load_split(config)
        if (train.num_users, train.num_items) != (params.num_users, params.num_items):
            raise ConfigError(f'<cli>:0: checkpoint shape ({params.num_users} users, {params.num_items} items) '
                              f'does not match the dataset ({train.num_users}, {train.num_items})')

        histories = interaction_provider.build_user_histories(train, hp.max_history)
        metrics = evaluate(params, test, histories, hp, train_items=train.user_items(),
                           settings=config.eval_settings())

        ks = sorted(metrics.hr)
        table = [['metric'] + [f'@{k}' for k in ks],
                 ['HR'] + [f'{metrics.hr[k]:.4f}' for k in ks],
                 ['NDCG'] + [f'{metrics.ndcg[k]:.4f}' for k in ks]]
        Cli._print_table(table)

        if metrics.diversity:
            depths = sorted(metrics.diversity)
            Cli._print_table([['distinct items'] + [f'top-{d}' for d in depths],
                              [''] + [str(metrics.diversity[d]) for d in depths]])

        if json_out:
            set_json_config(json_out, metrics.as_dict())

        return EXIT_OK

    @staticmethod
    def inspect_aug(argv) -> int:
        if Cli._print_help_if_requested(argv, [], text='Usage: inspect-aug <augmentations.tsv>'):
            return EXIT_OK

        positionals, _ = Cli._parse_args(argv[2:], value_flags=[])
        if len(positionals) != 1:
            raise ConfigError('<cli>:0: inspect-aug expects exactly one augmentation dump')

        path = positionals[0]
        summary = summarize_augmentations(Cli._read_augmentation_dump(path))

        table = [['source', 'count', 'distinct_items']]
        for source, s in summary['sources'].items():
            table.append([source, s['count'], s['distinct_items']])
        table.append(['all', summary['total'], summary['distinct_items']])
        Cli._print_table(table)

        edges = summary['weight_bin_edges']
        print('\nWeight histograms')
        hist_table = [['source'] + [f'<{e:.1f}' if i < len(edges) - 2 else f'<={e:.1f}' for i, e in enumerate(edges[1:])]]
        for source, s in summary['sources'].items():
            hist_table.append([source] + s['weight_histogram'])
        Cli._print_table(hist_table)

        if summary['overlaps']:
            print('\nShared distinct items')
            Cli._print_table([[pair, n] for pair, n in summary['overlaps'].items()])

        return EXIT_OK

    @staticmethod
    def compare(argv) -> int:
        if Cli._print_help_if_requested(argv, [
            ['--seeds <list>', 'Comma-separated seeds (default: seed, seed+1, seed+2)'],
            *Cli._config_help(),
        ], text='Usage: compare <config> [--seeds 1,2,3]'):
            return EXIT_OK

        positionals, flags = Cli._parse_args(argv[2:], value_flags=[*RunConfig.keys(), 'seeds'])
        seeds_flag = flags.pop('seeds', None)
        config = Cli._load_config(positionals, flags)
        out = Cli._prepare_output_dir(config)

        try:
            seeds = [int(s) for s in seeds_flag.split(',')] if seeds_flag else [config.seed + i for i in range(3)]
            if min(seeds) < 0:
                raise ValueError()
        except ValueError:
            raise ConfigError(f'<cli>:0: invalid --seeds "{seeds_flag}"')

        _, train, test, _ = Cli._load_split(config)
        config.control_run = False

        per_seed = []
        for seed in seeds:
            logging.info(f'compare: seed {seed}')
            config.seed = seed
            _, _, report = run_divspa(train, test, config.pipeline_config(), np.random.default_rng(seed))
            per_seed.append((seed, report.base, report.divspa))

        text, data = compare_report(per_seed)
        set_json_config(os.path.join(out, OUTPUT_FILES['compare_json']), data)
        Cli._write_text(os.path.join(out, OUTPUT_FILES['compare']), text)

        print(text)
        return EXIT_OK

    @staticmethod
    def fetch_movielens(argv) -> int:
        if Cli._print_help_if_requested(argv, [], text='Usage: fetch-movielens <dest.tsv>'):
            return EXIT_OK

        positionals, _ = Cli._parse_args(argv[2:], value_flags=[])
        if len(positionals) != 1:
            raise ConfigError('<cli>:0: fetch-movielens expects a destination file')

        print(f'Downloading from:\n{movielens_provider.url}')
        rows = movielens_provider.fetch(positionals[0],
            lambda s: print("\rStatus: " + str(round(s * 100)) + "%", end=""))

        print(f'\n{rows} interactions written to {positionals[0]}')
        return EXIT_OK

    # ---- helpers

    @staticmethod
    def _fail(e: Exception, code: int) -> int:
        message = str(e).splitlines()[0] if str(e) else e.__class__.__name__
        print(f'Error: {message}', file=sys.stderr)
        return code

    @staticmethod
    def _parse_args(args: Sequence[str], value_flags: Sequence[str]) -> Tuple[List[str], Dict[str, str]]:
        """Splits positionals from `--key value` / `--key=value` flags"""
        known = {normalize_key(f) for f in value_flags}
        positionals: List[str] = []
        flags: Dict[str, str] = {}

        i = 0
        while i < len(args):
            a = args[i]
            if a.startswith('--'):
                key, eq, value = a[2:].partition('=')
                key = normalize_key(key)

                if key not in known:
                    raise ConfigError(f'<cli>:0: unknown option --{key}')

                if not eq:
                    if i + 1 >= len(args):
                        raise ConfigError(f'<cli>:0: option --{key} needs a value')
                    i += 1
                    value = args[i]

                flags[key] = value
            else:
                positionals.append(a)

            i += 1

        return positionals, flags

    @staticmethod
    def _load_config(positionals: List[str], overrides: Dict[str, str]) -> RunConfig:
        if len(positionals) > 1:
            raise ConfigError(f'<cli>:0: expected one config file, got {len(positionals)}')

        config = RunConfig.from_file(positionals[0]) if positionals else RunConfig()
        config.apply_overrides(overrides)

        if not config.dataset:
            raise ConfigError('<cli>:0: "dataset" is not set')

        return config

    @staticmethod
    def _prepare_output_dir(config: RunConfig) -> str:
        out = config.output_dir
        if not os.path.exists(out):
            os.makedirs(out)

        config.save(os.path.join(out, OUTPUT_FILES['config']))
        return out

    @staticmethod
    def _load_split(config: RunConfig):
        ds = interaction_provider.load_interactions(config.dataset)
        train, test, split = interaction_provider.chronological_split(ds, config.test_fraction)
        return ds, train, test, split

    @staticmethod
    def _parse_sources(raw: str) -> Tuple[CandidateSource, ...]:
        names = [n.strip().lower() for n in raw.split(',') if n.strip()]
        known = {s.value: s for s in ALL_SOURCES}
        unknown = [n for n in names if n not in known]

        if unknown or not names:
            raise ConfigError(f'<cli>:0: --drop expects a subset of u2i,i2i,u2u2i, got "{raw}"')

        return tuple(s for s in ALL_SOURCES if s.value in names)

    @staticmethod
    def _ablation_label(dropped: Sequence[CandidateSource]) -> str:
        if set(dropped) == set(ALL_SOURCES):
            return 'w/o all'

        return 'w/o ' + '+'.join(s.value for s in dropped)

    @staticmethod
    def _read_augmentation_dump(path: str):
        if not os.path.isfile(path):
            raise DataError(f'Augmentation dump not found: {path}')

        with open(path, 'r', encoding='utf-8') as f:
            for line_no, line in enumerate(f, start=1):
                cols = line.rstrip('\n').split('\t')
                if len(cols) < 6:
                    raise DataError(f'{path}:{line_no}: expected 6 columns')

                try:
                    yield cols[2], cols[3], float(cols[5])
                except ValueError:
                    raise DataError(f'{path}:{line_no}: weight "{cols[5]}" is not a number')

    @staticmethod
    def _write_text(path: str, text: str):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)

        logging.info(f'Saved {path}')

    @staticmethod
    def _config_help() -> List[List[str]]:
        return [
            ['--<key> <value>', 'Override any config key, e.g. --epochs 5 --beta-mix 0.2'],
            ['keys', ', '.join(RunConfig.keys())],
            [THREADS_ENV, 'Default for --threads'],
        ]

    @staticmethod
    def _print_usage():
        print(f'Usage: {APP_NAME} <command> [OPTION...]\n')
        Cli._print_table([[o.long_name, o.arg_description, o.description] for o in Cli.options])
        print(f'\nGlobal flags: --debug-logs (debug level in the log file)')
        print(f'Use `{APP_NAME} <command> --help` for the options of a command')

    @staticmethod
    def _print_table(table):
        if (not table):
            return

        print(format_table(table))

    @staticmethod
    def _get_invoked_option(argv):
        for opt in Cli.options:
            long_name = str(opt.long_name)
            if argv[1] in (long_name, f'--{long_name}'):
                return opt

        return None

    @staticmethod
    def _print_help_if_requested(argv, help: list, text='') -> bool:
        if '--help' in argv or '-h' in argv:
            opt = Cli._get_invoked_option(argv)
            if opt:
                print(str(opt.description) + '\n')

            if text:
                print(text + '\n')

            Cli._print_table(help)
            return True

        return False
