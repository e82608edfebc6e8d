/* Copyright 2026 The headorient Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef HEADORIENT_WAV_HPP_
#define HEADORIENT_WAV_HPP_

#include <filesystem>
#include <vector>

namespace headorient {

enum class WavEncoding { kPcm16, kFloat32 };

// De-interleaved audio: channels[c][i].
struct AudioBuffer {
  int sample_rate = 0;
  std::vector<std::vector<double>> channels;

  std::size_t frames() const {
    return channels.empty() ? 0 : channels.front().size();
  }
};

// Reads RIFF/WAVE with PCM 8/16/24/32-bit or IEEE float 32/64 payloads.
// Throws IoError when the file cannot be opened, DataError when malformed.
AudioBuffer read_wav(const std::filesystem::path& path);

// Writes deterministically (fixed 44-byte canonical header), so identical
// buffers produce identical files.
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding);

}  // namespace headorient

#endif  // HEADORIENT_WAV_HPP_
