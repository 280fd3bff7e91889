import logging
import os
from typing import Any, Dict, Optional

import yaml

from pawcap.avatar.response import DEFAULT_RESPONSES, PlaybackConfig
from pawcap.behaviour.events import GestureKind
from pawcap.behaviour.fusion import Emotion, FusionConfig
from pawcap.behaviour.recognizer import RecognizerConfig
from pawcap.body.skeleton import DATA_DIR
from pawcap.body.tracker import TrackerConfig
from pawcap.util import PawcapError

_SECTIONS = {
    'calibration': None,
    'topology': None,
    'target-skeleton': None,
    'clip-library': None,
    'seed': None,
    'sync-tolerance': None,
    'max-reproj-error': None,
    'tracker': {'alpha', 'beta', 'max-coast', 'conf-decay'},
    'recognizer': {key.replace('_', '-')
                   for key in RecognizerConfig.DEFAULTS},
    'fusion': {'window', 'hold', 'min-audio-confidence', 'gestures',
               'audio-adjustments'},
    'playback': {'blend', 'max-angular-velocity', 'responses',
                 'idle-amplitude'},
    'proportions': {'warm-up-frames', 'alpha', 'min-conf'},
    'synth': {'duration', 'fps', 'noise-px', 'dropout'},
    'logging': {'file', 'level'},
}


class ConfigError(PawcapError):
    pass


class Config:
    def __init__(self, config: Optional[Dict[str, Any]] = None,
                 base_dir: str = '.') -> None:
        """Create a configuration object.

        Args:
            config: The configuration dict, as loaded from YAML.
            base_dir: Directory that relative paths are resolved
                against, normally that of the configuration file.

        Raises:
            ConfigError: If the dict has unknown keys or invalid values.
        """
        self._logger = logging.getLogger(__name__)
        """Logger: The logger for this class."""
        self._config = config or {}
        """The configuration dictionary."""
        self._base_dir = base_dir
        """Directory relative paths are relative to."""

        if not isinstance(self._config, dict):
            raise ConfigError('Configuration must be a mapping')
        self._check_keys()
        # build everything once so bad values fail early
        self.get_tracker_config()
        self.get_recognizer_config()
        self.get_fusion_config()
        self.get_playback_config()
        self._positive('sync-tolerance', self.get_sync_tolerance())
        self._positive('max-reproj-error', self.get_max_reproj_error())
        self._positive('proportions.warm-up-frames',
                       self.get_warm_up_frames())

    def with_overrides(self, values: Dict[str, Any]) -> 'Config':
        """A copy of this configuration with top-level keys replaced."""
        config = dict(self._config)
        config.update(values)
        return Config(config, self._base_dir)

    def _check_keys(self) -> None:
        for key, value in self._config.items():
            if key not in _SECTIONS:
                raise ConfigError('Unknown configuration key {}'.format(key))
            allowed = _SECTIONS[key]
            if allowed is None:
                continue
            if not isinstance(value, dict):
                raise ConfigError('Configuration section {} must be a'
                                  ' mapping'.format(key))
            for sub in value:
                if sub not in allowed:
                    raise ConfigError('Unknown configuration key {}.{}'
                                      .format(key, sub))

    def _positive(self, name: str, value: float) -> None:
        if not value > 0:
            raise ConfigError('{} must be positive'.format(name))

    def _section(self, name: str) -> Dict[str, Any]:
        return self._config.get(name) or {}

    def _path(self, key: str, default: Optional[str]) -> Optional[str]:
        value = self._config.get(key)
        if value is None:
            return default
        return os.path.join(self._base_dir, os.path.expanduser(str(value)))

    def get_calibration_path(self) -> Optional[str]:
        """Path of the rig calibration, or None for the default rig."""
        return self._path('calibration', None)

    def get_topology_path(self) -> str:
        return self._path('topology',
                          os.path.join(DATA_DIR, 'human_topology.json'))

    def get_target_skeleton_path(self) -> str:
        return self._path('target-skeleton',
                          os.path.join(DATA_DIR, 'cat_skeleton.json'))

    def get_clip_library_path(self) -> str:
        return self._path('clip-library', os.path.join(DATA_DIR, 'clips.json'))

    def get_seed(self) -> int:
        """The seed, from PAWCAP_SEED if set, else the configuration."""
        if 'PAWCAP_SEED' in os.environ:
            try:
                return int(os.environ['PAWCAP_SEED'])
            except ValueError:
                raise ConfigError('PAWCAP_SEED must be an integer')
        return int(self._config.get('seed', 0))

    def get_sync_tolerance(self) -> float:
        return float(self._config.get('sync-tolerance', 0.002))

    def get_max_reproj_error(self) -> float:
        """Reprojection error (px) above which a joint is dropped."""
        return float(self._config.get('max-reproj-error', 20.0))

    def get_tracker_config(self) -> TrackerConfig:
        section = self._section('tracker')
        try:
            return TrackerConfig(
                alpha=float(section.get('alpha', 0.5)),
                beta=float(section.get('beta', 0.1)),
                max_coast=int(section.get('max-coast', 10)),
                conf_decay=float(section.get('conf-decay', 0.8)))
        except ValueError as e:
            raise ConfigError('Invalid tracker configuration: {}'.format(e))

    def get_recognizer_config(self) -> RecognizerConfig:
        section = self._section('recognizer')
        try:
            return RecognizerConfig(**{
                key.replace('-', '_'): float(value)
                for key, value in section.items()})
        except (ValueError, TypeError) as e:
            raise ConfigError('Invalid recognizer configuration: {}'.format(
                e))

    def get_fusion_config(self) -> FusionConfig:
        section = self._section('fusion')
        try:
            gestures = None
            if 'gestures' in section:
                gestures = {
                    GestureKind.from_label(label): (
                        Emotion(entry['emotion']), float(entry['intensity']))
                    for label, entry in section['gestures'].items()}
            adjustments = None
            if 'audio-adjustments' in section:
                adjustments = {
                    Emotion(label): float(value)
                    for label, value in section['audio-adjustments'].items()}
            hold = section.get('hold')
            return FusionConfig(
                window=float(section.get('window', 1.0)),
                hold=None if hold is None else float(hold),
                min_audio_confidence=float(
                    section.get('min-audio-confidence', 0.5)),
                gesture_table=gestures,
                audio_adjustments=adjustments)
        except (ValueError, TypeError, KeyError, AttributeError) as e:
            raise ConfigError('Invalid fusion configuration: {}'.format(e))

    def get_playback_config(self) -> PlaybackConfig:
        section = self._section('playback')
        try:
            responses = dict(DEFAULT_RESPONSES)
            for label, clip in section.get('responses', {}).items():
                responses[GestureKind.from_label(label)] = str(clip)
            return PlaybackConfig(
                blend=float(section.get('blend', 0.25)),
                max_angular_velocity=float(
                    section.get('max-angular-velocity', 720.0)),
                responses=responses)
        except (ValueError, TypeError, AttributeError) as e:
            raise ConfigError('Invalid playback configuration: {}'.format(e))

    def get_idle_amplitude(self) -> float:
        """Amplitude (degrees) of the avatar's idle tail sway."""
        return float(self._section('playback').get('idle-amplitude', 10.0))

    def get_warm_up_frames(self) -> int:
        return int(self._section('proportions').get('warm-up-frames', 15))

    def get_proportions_alpha(self) -> float:
        return float(self._section('proportions').get('alpha', 0.02))

    def get_proportions_min_conf(self) -> float:
        return float(self._section('proportions').get('min-conf', 0.5))

    def get_synth_settings(self) -> Dict[str, float]:
        """Defaults of the synth command: duration, fps, noise-px and
        dropout."""
        section = self._section('synth')
        return {
            'duration': float(section.get('duration', 6.0)),
            'fps': float(section.get('fps', 30.0)),
            'noise-px': float(section.get('noise-px', 0.0)),
            'dropout': float(section.get('dropout', 0.0)),
        }

    def has_logging(self) -> bool:
        """
        Returns if logging is configured.

        Returns:
            True iff a logging section is available in the configuration.
        """
        return 'logging' in self._config

    def get_log_file(self) -> Optional[str]:
        """
        Returns the configured path for the log file, or None to log
        to standard error.
        """
        value = self._section('logging').get('file')
        if value is None:
            return None
        return os.path.join(self._base_dir, str(value))

    def get_log_level(self) -> int:
        """
        Returns the configured log level, overridden by the
        PAWCAP_LOG_LEVEL environment variable if it is set.

        Returns:
            (int): The log level, following Python's built-in logging \
                    library.
        """
        loglevel_str = self._section('logging').get('level', 'INFO')
        if 'PAWCAP_LOG_LEVEL' in os.environ:
            loglevel_str = os.environ['PAWCAP_LOG_LEVEL'].strip()
        loglevel = getattr(logging, str(loglevel_str).upper(), None)
        if not isinstance(loglevel, int):
            raise ConfigError('Invalid log level {}'.format(loglevel_str))
        return loglevel


def make_config(path: Optional[str] = None) -> Config:
    """Make a configuration object.

    Args:
        path: A YAML configuration file; None gives the defaults.

    Returns:
        Config: The pawcap configuration.

    Raises:
        ConfigError: If the file cannot be read or is invalid.
    """
    if path is None:
        return Config({})
    try:
        with open(path) as config_file:
            config = yaml.safe_load(config_file)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError('Could not load configuration {}: {}'.format(
            path, e))
    return Config(config or {}, os.path.dirname(os.path.abspath(path)))
