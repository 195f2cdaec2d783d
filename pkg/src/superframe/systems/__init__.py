from .super_resolver import VideoSuperResolver, describe, generate_sequence
