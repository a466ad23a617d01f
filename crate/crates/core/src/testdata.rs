//! Shared fixtures for unit tests across modules.

/// The seven analysis-target rows: purchase category and city. The category
/// "Cake _ Department store" appears twice, so the induced table is 6×7.
pub(crate) fn purchase_city_rows() -> Vec<(String, String)> {
    [
        ("Hair dryer _ Home electronics retailer", "Shinjuku-ku, Tokyo, Japan"),
        ("Refrigerator _ Home electronics retailer", "Asaka-City, Saitama, Japan"),
        ("Clothing _ Department store", "Osaka-shi, Osaka, Japan"),
        ("Cake _ Department store", "Ichikawa-city, Chiba, Japan"),
        ("Cake _ Supermarket", "Oita-city, Oita, Japan"),
        ("Cake _ Department store", "Adachi-ku, Tokyo, Japan"),
        ("Desk _ Supermarket", "Akita-city, Akita, Japan"),
    ]
    .iter()
    .map(|(r, c)| (r.to_string(), c.to_string()))
    .collect()
}

/// Citation pairs where two labels appear on both sides, violating the
/// two-mode link restriction.
pub(crate) fn citation_rows() -> Vec<(String, String)> {
    [
        ("Akira, O.2000", "Author, A2013"),
        ("Akira, O.2000", "Author, B2011"),
        ("Akira, O.2000", "Author, C2012"),
        ("Masayoshi, K.1995", "Author, D2012"),
        ("Masayoshi, K.1995", "Akira, O.2000"),
        ("Masayoshi, K.1995", "Author, E2012"),
        ("Author, E2012", "Author, F2012"),
    ]
    .iter()
    .map(|(r, c)| (r.to_string(), c.to_string()))
    .collect()
}

/// Item–place pairs with one repeated row, a strict two-mode set.
pub(crate) fn item_place_rows() -> Vec<(String, String)> {
    [
        ("Electrical appliances", "Electrical appliance store"),
        ("Electrical appliances", "Electrical appliance store"),
        ("Dress", "Department store"),
        ("Accessories", "Department store"),
        ("Cake", "Supermarket"),
    ]
    .iter()
    .map(|(r, c)| (r.to_string(), c.to_string()))
    .collect()
}
