#pragma once

#include "ragsynth/corpus.hpp"
#include "ragsynth/diversity.hpp"
#include "ragsynth/embedding.hpp"
#include "ragsynth/entity.hpp"
#include "ragsynth/error.hpp"
#include "ragsynth/evaluation.hpp"
#include "ragsynth/llm.hpp"
#include "ragsynth/pipeline.hpp"
#include "ragsynth/privacy.hpp"
#include "ragsynth/prompts.hpp"
#include "ragsynth/qa.hpp"
