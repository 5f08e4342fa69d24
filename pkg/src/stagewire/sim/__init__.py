"""Software stand-ins for the show hardware."""

from .choreography import ChoreographyScript, Lift, MoveTo, Place, ScriptInvalid, load_script, run_choreography
from .midi import MidiBridgeRule, MidiEvent, load_midi_rules, midi_to_osc, read_midi_events
from .ppg import PpgParams, PpgTrace, noise_for_snr, synth_ppg
