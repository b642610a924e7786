#pragma once

#include <filesystem>

#include "ripple/dsp.hpp"

namespace ripple::wav {

/// Reads a 16-bit PCM mono 16 kHz RIFF/WAVE file. Anything else is rejected
/// with a DataFormatError naming the offending field.
dsp::Waveform read(const std::filesystem::path& path);

/// Writes 16-bit PCM mono. Samples are clamped to [-1, 1] and quantized as
/// round(x * 32767); read() maps them back as s / 32767, so grid values
/// round-trip exactly.
void write(const std::filesystem::path& path, const dsp::Waveform& w);

}  // namespace ripple::wav
