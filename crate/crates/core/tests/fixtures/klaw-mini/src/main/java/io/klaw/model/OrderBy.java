package io.klaw.model;

public enum OrderBy {
    OLDEST_FIRST,
    NEWEST_FIRST
}
