export * from "./codec.js";
export * from "./encoder.js";
export * from "./export.js";
export * from "./generation.js";
export * from "./relevance.js";
export * from "./server.js";
