#pragma once

#include "affd/audio_io.hpp"
#include "affd/blocks/attention.hpp"
#include "affd/blocks/model.hpp"
#include "affd/dsp/cepstral.hpp"
#include "affd/dsp/fft.hpp"
#include "affd/dsp/filterbank.hpp"
#include "affd/dsp/framing.hpp"
#include "affd/error.hpp"
#include "affd/features/feature_file.hpp"
#include "affd/features/masking.hpp"
#include "affd/features/padding.hpp"
#include "affd/metrics.hpp"
#include "affd/nn/checkpoint.hpp"
#include "affd/nn/gradcheck.hpp"
#include "affd/nn/layers.hpp"
#include "affd/nn/loss.hpp"
#include "affd/nn/optim.hpp"
#include "affd/pipeline/config.hpp"
#include "affd/pipeline/extract.hpp"
#include "affd/pipeline/manifest.hpp"
#include "affd/pipeline/mlp.hpp"
#include "affd/pipeline/synth.hpp"
#include "affd/pipeline/train.hpp"
