from abc import ABC, abstractmethod
from channel_model import (
    ChannelSet,
    PathEnvironment,
    SystemGeometry,
    build_channels,
    refresh_group,
)


class ChannelProviderError(Exception):
    pass


class ChannelProvider(ABC):
    """Abstract base class for channel providers"""

    @abstractmethod
    def build(self, geometry: SystemGeometry) -> ChannelSet:
        """Build channels for the current reference points"""
        pass

    def refresh_group(
        self, channels: ChannelSet, geometry: SystemGeometry, g: int
    ) -> ChannelSet:
        """Refresh channels after group g moved"""
        return self.build(geometry)

    @property
    def supports_placement(self) -> bool:
        return False

    @property
    def environment(self) -> PathEnvironment:
        raise ChannelProviderError(
            f"{type(self).__name__} has no path environment for placement"
        )


class FieldResponseChannelProvider(ChannelProvider):
    """Channel provider using the field-response model of a sampled environment"""

    def __init__(self, env: PathEnvironment, noise_power: float):
        self.env = env
        self.noise_power = noise_power

    def build(self, geometry: SystemGeometry) -> ChannelSet:
        return build_channels(geometry, self.env, self.noise_power)

    def refresh_group(
        self, channels: ChannelSet, geometry: SystemGeometry, g: int
    ) -> ChannelSet:
        return refresh_group(channels, geometry, self.env, g)

    @property
    def supports_placement(self) -> bool:
        return True

    @property
    def environment(self) -> PathEnvironment:
        return self.env


class StaticChannelProvider(ChannelProvider):
    """Channel provider with predefined channels that ignore positions (for testing)"""

    def __init__(self, channels: ChannelSet):
        self.channels = channels

    def build(self, geometry: SystemGeometry) -> ChannelSet:
        return self.channels
