fn main() {
    println!("equibasis");
}
