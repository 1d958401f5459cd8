"""
ACCEPTANCE SUITE
================

Runs every scene in data/scenes/ through the commands it lists and
records one verdict line per (scene, command) pair.

Output: data/acceptance_TIMESTAMP.json

Usage:
    python benchmarks/acceptance_suite.py

    # Only some commands, or a single worker:
    python benchmarks/acceptance_suite.py --commands spectral,roundtrip --workers 1
"""

import sys
import os

# Add parent directory to path
parent_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, parent_dir)

from core.cli import run
from core.config import ToolkitConfig
from core.errors import ToolkitError
from core.scene import load_scene

import argparse
import concurrent.futures
import json
import logging
import time
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from colorama import Fore, init

init(autoreset=True)

logger = logging.getLogger(__name__)

DATA_DIR = Path(parent_dir) / 'data'
SCENE_DIR = DATA_DIR / 'scenes'


def run_job(job: Tuple[str, str]) -> Dict:
    """One (scene path, command) pair; module errors become an 'error' outcome"""
    path, command = job
    start = time.time()
    try:
        scene = load_scene(path)
        report = run(command, scene, ToolkitConfig().merged(scene.options))
        outcome = 'pass' if report.passed else 'fail'
        failed = [v.name for v in report.verdicts if not v.passed]
        detail = ", ".join(failed)
    except ToolkitError as e:
        outcome, detail = 'error', str(e)
    return {
        'scene': Path(path).stem,
        'command': command,
        'outcome': outcome,
        'detail': detail,
        'seconds': round(time.time() - start, 3),
    }


class AcceptanceSuite:
    """Batch runner over the scene corpus"""

    def __init__(self, scene_dir: Path = SCENE_DIR, commands: Optional[List[str]] = None,
                 workers: int = 4, verbose: bool = True, output_dir: Path = DATA_DIR):
        self.scene_dir = Path(scene_dir)
        self.output_dir = Path(output_dir)
        self.commands = commands
        self.workers = workers
        self.verbose = verbose
        self.output_file = None
        self.results = {
            'metadata': {
                'timestamp': datetime.now().isoformat(),
                'scene_dir': str(self.scene_dir),
                'commands': commands,
                'workers': workers,
            },
            'runs': [],
            'summary': {}
        }

    def run_full_suite(self) -> Dict:
        if self.verbose:
            self._print_header("JETHIGGS ACCEPTANCE SUITE")
        jobs = self._collect_jobs()
        if self.verbose:
            print(f"{Fore.YELLOW}[1/2] Running {len(jobs)} job(s) on {self.workers} worker(s)...")
        start = time.time()
        self._run_all(jobs)
        self.results['metadata']['time_seconds'] = round(time.time() - start, 1)
        if self.verbose:
            print(f"\n{Fore.YELLOW}[2/2] Analysis...")
        self._calculate_summary()
        self._save_results()
        return self.results

    def _collect_jobs(self) -> List[Tuple[str, str]]:
        jobs = []
        for path in sorted(self.scene_dir.glob('*.json')):
            try:
                scene = load_scene(path)
            except ToolkitError as e:
                logger.warning("skipping %s: %s", path.name, e)
                self.results['runs'].append({'scene': path.stem, 'command': None, 'outcome': 'error',
                                             'detail': str(e), 'seconds': 0.0})
                continue
            for command in scene.commands:
                if self.commands is None or command in self.commands:
                    jobs.append((str(path), command))
        return jobs

    def _run_all(self, jobs: List[Tuple[str, str]]):
        total = len(jobs)
        if self.workers <= 1:
            outcomes = map(run_job, jobs)
        else:
            executor = concurrent.futures.ProcessPoolExecutor(max_workers=self.workers)
            outcomes = executor.map(run_job, jobs, chunksize=1)
        try:
            for i, outcome in enumerate(outcomes, 1):
                self.results['runs'].append(outcome)
                if self.verbose:
                    self._print_outcome(i, total, outcome)
        finally:
            if self.workers > 1:
                executor.shutdown()

    def _print_outcome(self, i: int, total: int, outcome: Dict):
        color, mark = {'pass': (Fore.GREEN, '✓'), 'fail': (Fore.RED, '✗'),
                       'error': (Fore.RED, '!')}[outcome['outcome']]
        line = f"  [{i}/{total}] {color}{mark} {outcome['scene']} :: {outcome['command']}"
        print(f"{line} {Fore.WHITE}({outcome['seconds']:.1f}s)")
        if outcome['detail'] and outcome['outcome'] != 'pass':
            print(f"{Fore.YELLOW}      {outcome['detail']}")

    def _calculate_summary(self):
        runs = self.results['runs']
        by_command: Dict[str, Dict[str, int]] = {}
        for r in runs:
            counts = by_command.setdefault(r['command'] or 'parse', {'pass': 0, 'fail': 0, 'error': 0})
            counts[r['outcome']] += 1
        passed = sum(r['outcome'] == 'pass' for r in runs)
        self.results['summary'] = {
            'total_runs': len(runs),
            'passed': passed,
            'failed': sum(r['outcome'] == 'fail' for r in runs),
            'errors': sum(r['outcome'] == 'error' for r in runs),
            'pass_rate': passed / len(runs) * 100 if runs else 0,
            'by_command': by_command,
        }
        if self.verbose:
            self._print_summary()

    def _print_summary(self):
        s = self.results['summary']
        print(f"\n{Fore.CYAN}{'=' * 70}")
        print(f"{Fore.GREEN}🎯 ACCEPTANCE RESULTS")
        print(f"{Fore.CYAN}{'=' * 70}\n")
        print(f"{Fore.WHITE}Total Runs: {s['total_runs']}")
        print(f"{Fore.WHITE}  Passed: {s['passed']}  Failed: {s['failed']}  Errors: {s['errors']}")
        print(f"{Fore.WHITE}  Pass Rate: {s['pass_rate']:.1f}%\n")
        for command, counts in sorted(s['by_command'].items()):
            print(f"{Fore.WHITE}  {command:<18} {counts['pass']} pass, {counts['fail']} fail, {counts['error']} error")
        print(f"\n{Fore.CYAN}{'=' * 70}")

    def _save_results(self):
        timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
        os.makedirs(self.output_dir, exist_ok=True)
        self.output_file = os.path.join(self.output_dir, f'acceptance_{timestamp}.json')

        with open(self.output_file, 'w', encoding='utf-8') as f:
            json.dump(self.results, f, indent=2, ensure_ascii=False)

        if self.verbose:
            print(f"\n{Fore.GREEN}✅ Results saved: {self.output_file}")

    def _print_header(self, title: str):
        print(f"\n{Fore.CYAN}{'=' * 70}")
        print(f"{Fore.YELLOW}  {title}")
        print(f"{Fore.WHITE}  Scenes: {self.scene_dir}")
        print(f"{Fore.CYAN}{'=' * 70}\n")


def main():
    """Main entry point"""

    parser = argparse.ArgumentParser(description='Run every scene through its listed commands')
    parser.add_argument('--commands', type=str, help='Comma-separated command names')
    parser.add_argument('--workers', type=int, default=4, help='Worker processes (1 runs inline)')
    parser.add_argument('--scenes', type=str, default=str(SCENE_DIR), help='Scene directory')

    args = parser.parse_args()
    commands = args.commands.split(',') if args.commands else None

    try:
        suite = AcceptanceSuite(Path(args.scenes), commands, args.workers)
        results = suite.run_full_suite()
    except KeyboardInterrupt:
        print(f"\n\n{Fore.YELLOW}⚠️  Suite interrupted by user")
        return 130
    return 0 if results['summary']['passed'] == results['summary']['total_runs'] else 1


if __name__ == "__main__":
    sys.exit(main())
