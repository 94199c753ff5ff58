#pragma once

#include "nyaya/agreement.hpp"
#include "nyaya/config.hpp"
#include "nyaya/corpus.hpp"
#include "nyaya/error.hpp"
#include "nyaya/evaluation.hpp"
#include "nyaya/gateway.hpp"
#include "nyaya/judgment.hpp"
#include "nyaya/mock_llm.hpp"
#include "nyaya/pipeline.hpp"
#include "nyaya/retrieval.hpp"
#include "nyaya/store.hpp"
#include "nyaya/summarizer.hpp"
#include "nyaya/text.hpp"
