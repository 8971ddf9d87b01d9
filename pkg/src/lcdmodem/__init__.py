"""Display-driven acoustic FSK modem.

Square-wave bitmaps whose scan-out frequency sets an audible tone, a
packet codec that keys those tones, a simulated air channel and a
matching receiver.
"""

from .display import (DisplayConfig, PRESETS, effective_pixel_clock, nominal_pixel_clock,
                      preset, visible_pixel_fraction)
from .pattern import (Bitmap, PatternSpec, SplitSpec, cycle_size, generate_split_bitmap,
                      generate_square_bitmap, measure_bitmap_frequency)
from .codec import (BadChecksum, BadLength, BadPreamble, FrameSchedule, InfeasiblePlan,
                    ModemConfig, Packet, PacketError, aggregate_rate, bits_to_schedule,
                    decode_packet, encode_packet, packets_to_schedule, plan_frequencies,
                    theoretical_rates)
from .audio import AudioBuffer
from .channel import (ChannelModel, add_noise, brightness_to_snr, distance_gain,
                      grayscale_energy, grayscale_energy_ratio, color_energy, synthesize,
                      transmit)
from .receiver import (DemodConfig, DemodResult, NoTransmission, demodulate, find_preamble,
                       measure_snr, spectrogram, tone_energy)

__version__ = "0.1.0"
