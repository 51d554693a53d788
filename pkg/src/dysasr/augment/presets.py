"""
Dysasr Augmentation Presets

Loads named augmentation presets from YAML.
"""

from pathlib import Path
import yaml

from dysasr.core.models import AugmentationPreset, PerturbationPolicy, PolicyScope


class PresetRegistry:
    """Registry of augmentation presets keyed by name."""

    def __init__(self, presets: dict[str, AugmentationPreset]):
        self._presets = presets

    @classmethod
    def from_config(
        cls,
        config_path: Path | str | None = None,
        package_root: Path | str | None = None,
    ) -> "PresetRegistry":
        """
        Load presets from a YAML file.

        Args:
            config_path: Preset file (default: the bundled presets)
            package_root: Root path of the dysasr package

        Returns:
            PresetRegistry instance
        """
        if package_root is None:
            package_root = Path(__file__).parent.parent

        if config_path is None:
            config_path = Path(package_root) / "presets" / "augmentation-presets.yaml"
        else:
            config_path = Path(config_path)

        if not config_path.exists():
            raise FileNotFoundError(f"Preset file not found: {config_path}")

        with open(config_path) as f:
            data = yaml.safe_load(f) or {}

        presets = {}
        for preset_data in data.get("presets", []):
            preset = AugmentationPreset.model_validate(preset_data)
            if preset.name in presets:
                raise ValueError(f"Duplicate preset name in {config_path}: {preset.name}")
            presets[preset.name] = preset
        return cls(presets)

    def get(self, name: str) -> AugmentationPreset:
        if name not in self._presets:
            available = ", ".join(sorted(self._presets))
            raise KeyError(f"Preset not found: {name}. Available: {available}")
        return self._presets[name]

    def resolve(
        self, name: str, speaker_factors: dict[str, float] | None = None
    ) -> list[PerturbationPolicy]:
        """
        Concrete policies for a preset.

        Args:
            name: Preset name
            speaker_factors: Speaker -> (clipped) factor, needed by
                control-to-dysarthric policies
        """
        preset = self.get(name)
        needs_factors = any(t.scope == PolicyScope.CONTROL_TO_DYS for t in preset.policies)
        if needs_factors and not speaker_factors:
            raise ValueError(f"Preset {name} needs dysarthric speaker factors")
        return [template.resolve(speaker_factors) for template in preset.policies]

    def list_presets(self) -> list[str]:
        return sorted(self._presets)

    def __len__(self) -> int:
        return len(self._presets)

    def __repr__(self) -> str:
        return f"PresetRegistry({len(self._presets)} presets)"


# Module-level singleton for convenience
_default_registry: PresetRegistry | None = None
_default_path: Path | None = None


def get_preset_registry(
    config_path: Path | str | None = None,
    reload: bool = False,
) -> PresetRegistry:
    """
    Get the default preset registry (singleton).

    Args:
        config_path: Optional custom preset file; a different path than the
            cached one reloads
        reload: Force reload even if already loaded
    """
    global _default_registry, _default_path

    path = None if config_path is None else Path(config_path)
    if _default_registry is None or reload or path != _default_path:
        _default_registry = PresetRegistry.from_config(path)
        _default_path = path

    return _default_registry
