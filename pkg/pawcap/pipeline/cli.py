"""Command line interface.

Exit codes: 0 on success, 2 for configuration errors, 3 for bad or
unprocessable data.
"""
import argparse
import json
import logging
import os
import sys
import time
import traceback
from collections import deque
from typing import Callable, Deque, Dict, List, Optional, Sequence

import numpy as np

from pawcap.behaviour.fusion import AudioEmotionEvent, UserState
from pawcap.config import Config, ConfigError, make_config
from pawcap.geometry.stereo import KeypointFrame2D, default_rig, load_rig
from pawcap.oracle.synthetic import (SCENARIO_KINDS, ScenarioSpec,
                                     generate_motion, render_views)
from pawcap.pipeline.evaluation import evaluate
from pawcap.pipeline.session import (Animation, Recognition, Session,
                                     SessionOutput, Tracking, load_session)
from pawcap.pipeline.streams import (keypoints_to_dict, pose_to_dict,
                                     read_audio, read_events, read_keypoints,
                                     read_poses, read_user_states,
                                     write_jsonl)
from pawcap.util import PawcapError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

_logger = logging.getLogger(__name__)


def setup_logging(config: Config) -> None:
    log_format = ('[%(asctime)s.%(msecs)03d] [%(levelname)s] %(message)s'
                  ' [%(name)s]')
    if not config.has_logging():
        logging.basicConfig(
            level=config.get_log_level(),
            format=log_format,
            datefmt='%Y-%m-%d %H:%M:%S')
        return
    logging.basicConfig(
        filename=config.get_log_file(),
        level=config.get_log_level(),
        format=log_format,
        datefmt='%Y-%m-%d %H:%M:%S')


def _out_path(args: argparse.Namespace, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _config(args: argparse.Namespace) -> Config:
    config = make_config(args.config)
    if args.calibration is not None:
        config = config.with_overrides(
            {'calibration': os.path.abspath(args.calibration)})
    return config


def _audio(args: argparse.Namespace) -> List[AudioEmotionEvent]:
    return read_audio(args.audio) if args.audio else []


def _write_output(args: argparse.Namespace, output: SessionOutput) -> None:
    write_jsonl(_out_path(args, 'tracked.jsonl'),
                (pose_to_dict(p) for p in output.tracked))
    write_jsonl(_out_path(args, 'events.jsonl'),
                (e.to_dict() for e in output.events))
    write_jsonl(_out_path(args, 'user_states.jsonl'),
                (s.to_dict() for s in output.user_states))
    write_jsonl(_out_path(args, 'animation.jsonl'),
                (a.to_dict() for a in output.avatar))


def run_session(session: Session, frames: Sequence[KeypointFrame2D],
                audio: Sequence[AudioEmotionEvent]) -> SessionOutput:
    output = session.process(frames, audio)
    output.extend(session.finish())
    return output


def cmd_synth(args: argparse.Namespace, config: Config) -> None:
    settings = config.get_synth_settings()
    seed = args.seed if args.seed is not None else config.get_seed()
    path = config.get_calibration_path()
    rig = default_rig() if path is None else load_rig(path)
    with open(_out_path(args, 'rig.json'), 'w') as f:
        json.dump(rig.to_dict(), f, indent=2)

    kinds = args.kind or list(SCENARIO_KINDS)
    noise = settings['noise-px'] if args.noise_px is None else args.noise_px
    dropout = settings['dropout'] if args.dropout is None else args.dropout
    for i, kind in enumerate(kinds):
        spec = ScenarioSpec(kind, settings['duration'], settings['fps'],
                            seed=seed * 1000 + i)
        truth = generate_motion(spec)
        left, right = render_views(rig, truth, noise, dropout,
                                   seed=spec.seed + 1)
        frames = [frame for pair in zip(left, right) for frame in pair]
        write_jsonl(_out_path(args, kind + '.keypoints.jsonl'),
                    (keypoints_to_dict(f) for f in frames))
        write_jsonl(_out_path(args, kind + '.truth.jsonl'),
                    (pose_to_dict(p) for p in truth.poses))
        write_jsonl(_out_path(args, kind + '.labels.jsonl'),
                    (label.to_dict() for label in truth.labels))
        _logger.info('Wrote scenario {}'.format(kind))


def cmd_run(args: argparse.Namespace, config: Config) -> None:
    session = load_session(config)
    output = run_session(session, read_keypoints(args.keypoints),
                         _audio(args))
    _write_output(args, output)


def cmd_track(args: argparse.Namespace, config: Config) -> None:
    session = load_session(config)
    tracking = session.tracking  # type: Tracking
    tracked = tracking.step(read_keypoints(args.keypoints))
    tracked.extend(tracking.finish())
    write_jsonl(_out_path(args, 'tracked.jsonl'),
                (pose_to_dict(p) for p in tracked))


def cmd_recognize(args: argparse.Namespace, config: Config) -> None:
    recognition = Recognition(config.get_recognizer_config(),
                              config.get_fusion_config())
    recognition.add_audio(_audio(args))
    events = []
    states = []
    for pose in read_poses(args.poses):
        new_events, state = recognition.step(pose)
        events.extend(new_events)
        states.append(state)
    write_jsonl(_out_path(args, 'events.jsonl'),
                (e.to_dict() for e in events))
    write_jsonl(_out_path(args, 'user_states.jsonl'),
                (s.to_dict() for s in states))


def cmd_retarget(args: argparse.Namespace, config: Config) -> None:
    session = load_session(config)
    animation = session.animation  # type: Animation
    states = deque(read_user_states(args.user_states)
                   if args.user_states else [])  # type: Deque[UserState]
    avatar = []
    for pose in read_poses(args.poses):
        state = None  # type: Optional[UserState]
        while states and states[0].t <= pose.t:
            state = states.popleft()
        avatar.append(animation.step(pose, state))
    write_jsonl(_out_path(args, 'animation.jsonl'),
                (a.to_dict() for a in avatar))


def _frame_rate(frames: Sequence[KeypointFrame2D]) -> Optional[float]:
    times = sorted({f.t for f in frames})
    if len(times) < 2:
        return None
    return 1.0 / float(np.median(np.diff(times)))


def cmd_eval(args: argparse.Namespace, config: Config) -> None:
    session = load_session(config)
    frames = read_keypoints(args.keypoints)
    audio = _audio(args)
    start = time.perf_counter()
    output = run_session(session, frames, audio)
    elapsed = time.perf_counter() - start

    truth = read_poses(args.truth) if args.truth else []
    labels = read_events(args.labels) if args.labels else []
    report = evaluate(output.events, labels, output.tracked, truth, elapsed,
                      args.fps or _frame_rate(frames), output.avatar)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        with open(_out_path(args, 'report.json'), 'w') as f:
            f.write(text + '\n')
    else:
        print(text)


COMMANDS = {
    'synth': cmd_synth,
    'run': cmd_run,
    'track': cmd_track,
    'recognize': cmd_recognize,
    'retarget': cmd_retarget,
    'eval': cmd_eval,
}  # type: Dict[str, Callable[[argparse.Namespace, Config], None]]


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None,
                        help='A YAML configuration file')
    common.add_argument('--seed', type=int, default=None,
                        help='Seed for synthetic data')
    common.add_argument('--out', type=str, default=None,
                        help='Output directory')
    common.add_argument('--calibration', type=str, default=None,
                        help='Rig calibration JSON, overrides the config')

    parser = argparse.ArgumentParser(
        prog='pawcap',
        description='Stereo motion capture driving a cat avatar')
    verbs = parser.add_subparsers(dest='command')
    verbs.required = True

    synth = verbs.add_parser('synth', parents=[common],
                             help='Generate a synthetic corpus')
    synth.add_argument('--kind', action='append', choices=SCENARIO_KINDS,
                       help='Scenario to generate, repeatable; default all')
    synth.add_argument('--noise-px', type=float, default=None)
    synth.add_argument('--dropout', type=float, default=None)

    for name, help_text in (('run', 'Run the full pipeline'),
                            ('track', 'Triangulate and track only'),
                            ('eval', 'Run the pipeline and score it')):
        verb = verbs.add_parser(name, parents=[common], help=help_text)
        verb.add_argument('--keypoints', type=str, required=True,
                          help='Keypoint stream JSONL, both cameras')
        if name != 'track':
            verb.add_argument('--audio', type=str, default=None,
                              help='Audio emotion events JSONL')
        if name == 'eval':
            verb.add_argument('--truth', type=str, default=None,
                              help='True poses JSONL')
            verb.add_argument('--labels', type=str, default=None,
                              help='Gesture labels JSONL')
            verb.add_argument('--fps', type=float, default=None)

    recognize = verbs.add_parser('recognize', parents=[common],
                                 help='Recognise gestures in tracked poses')
    recognize.add_argument('--poses', type=str, required=True)
    recognize.add_argument('--audio', type=str, default=None)

    retarget = verbs.add_parser('retarget', parents=[common],
                                help='Retarget tracked poses to the avatar')
    retarget.add_argument('--poses', type=str, required=True)
    retarget.add_argument('--user-states', type=str, default=None,
                          help='User states JSONL driving the responses')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    if args.out is None and args.command != 'eval':
        args.out = '.'

    try:
        config = _config(args)
    except ConfigError as e:
        sys.stderr.write('Configuration error: {}\n'.format(e))
        return EXIT_CONFIG
    setup_logging(config)

    logging.info('Starting {}'.format(args.command))
    try:
        COMMANDS[args.command](args, config)
    except ConfigError as e:
        logging.critical('Configuration error: {}'.format(e))
        return EXIT_CONFIG
    except (PawcapError, OSError, ValueError) as e:
        logging.critical(traceback.format_exc())
        sys.stderr.write('Data error: {}\n'.format(e))
        return EXIT_DATA
    logging.info('Finished {}'.format(args.command))
    return EXIT_OK
